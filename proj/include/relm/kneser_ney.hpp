#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relm/backoff_model.hpp"
#include "relm/count_of_counts.hpp"
#include "relm/counts.hpp"

namespace relm {

struct DiscountError : NumericError {
  int order;
  DiscountError(int k, const std::string& what) : NumericError(what), order(k) {}
};

struct KnOptions {
  // F(1..4) per order for tables whose low counts were cut off.
  std::map<int, CountOfCounts> coc_override;
  // Probability-space floor for contexts whose discounted mass vanishes.
  double backoff_floor = 1e-10;
  // Inject <unk> (and <s>-excluded reserved symbols) into the unigram
  // support.  Off for factor models over closed symbol sets.
  bool include_unk_in_support = true;
  // Symbol playing the sentence-start role; factor models over
  // composite symbols pass their boundary-pair id here.
  std::optional<WordId> bos_symbol;
  // Orders without singleton mass fall back to Witten-Bell smoothing
  // instead of erroring; used for factor models over closed symbol
  // sets, where F(1)=0 is structural rather than a data problem.
  bool fallback_to_witten_bell = false;
};

namespace detail {

inline KnDiscounts compute_discounts(int order, double f1, double f2, double f3,
                                     double f4) {
  if (f1 <= 0)
    throw DiscountError(order, "order " + std::to_string(order) +
                                   ": F(1) = 0, KN discounts undefined "
                                   "(supply or extrapolate counts-of-counts)");
  double y = f1 / (f1 + 2.0 * f2);
  KnDiscounts d;
  d.d1 = 1.0 - 2.0 * y * f2 / f1;
  d.d2 = f2 > 0 ? 2.0 - 3.0 * y * f3 / f2 : y;
  d.d3plus = f3 > 0 ? 3.0 - 4.0 * y * f4 / f3 : y;
  if (d.d1 < 0 || d.d2 < 0 || d.d3plus < 0)
    throw DiscountError(order, "order " + std::to_string(order) +
                                   ": negative KN discount from pathological "
                                   "counts-of-counts");
  return d;
}

}  // namespace detail

// Interpolated modified Kneser-Ney.  Top order uses raw counts; lower
// orders use continuation counts (raw for <s>-initial grams).  External
// tables keep raw counts at every order and the model is labeled
// "kn-from-counts".  Backoff weights are the exact leftover mass, so
// per-context sums stay at 1 even when a discount exceeds its bracket.
inline BackoffModel train_kn(const NGramCountTable& counts, const Vocabulary& vocab,
                             const KnOptions& options = {}) {
  int n = counts.max_order();
  WordId bos = options.bos_symbol.value_or(vocab.bos());
  BackoffModel model(n, vocab);
  model.mode = counts.external() ? "kn-from-counts" : "kn";

  // Adjusted counts, parallel to each order's rows.
  std::vector<std::vector<Count>> adjusted(n + 1);
  for (int k = 1; k <= n; ++k) {
    const OrderTable& ot = counts.order(k);
    adjusted[k].resize(ot.size());
    for (size_t i = 0; i < ot.size(); ++i) adjusted[k][i] = ot.count(i);
  }
  if (!counts.external()) {
    for (int k = 1; k < n; ++k) {
      const OrderTable& ot = counts.order(k);
      const OrderTable& higher = counts.order(k + 1);
      std::vector<Count> cont(ot.size(), 0);
      for (size_t i = 0; i < higher.size(); ++i) {
        auto key = higher.key(i);
        size_t idx = ot.find(key.subspan(1));
        if (idx == OrderTable::npos)
          throw NumericError("corpus table missing suffix gram; counts are "
                             "inconsistent (was the table cutoff-filtered?)");
        cont[idx] += 1;  // each distinct extension counts once
      }
      for (size_t i = 0; i < ot.size(); ++i)
        if (ot.key(i)[0] != bos) adjusted[k][i] = cont[i];
    }
  }

  // Discounts from counts-of-counts of the adjusted counts.
  model.discounts.resize(n + 1);
  for (int k = 1; k <= n; ++k) {
    double f[5] = {0, 0, 0, 0, 0};
    auto ov = options.coc_override.find(k);
    if (ov != options.coc_override.end()) {
      for (int c = 1; c <= 4; ++c) f[c] = ov->second.frequency(c);
    } else {
      for (Count a : adjusted[k])
        if (a >= 1 && a <= 4) f[a] += 1;
    }
    if (f[1] <= 0 && options.fallback_to_witten_bell) {
      model.discounts[k].witten_bell = true;
      continue;
    }
    model.discounts[k] = detail::compute_discounts(k, f[1], f[2], f[3], f[4]);
  }

  // Unigram support: event words plus reserved predictables, never <s>.
  std::vector<char> in_support(vocab.size(), 0);
  const OrderTable& uni = counts.order(1);
  double a1_total = 0;
  for (size_t i = 0; i < uni.size(); ++i) {
    WordId w = uni.key(i)[0];
    if (w == bos) continue;
    in_support[w] = 1;
    a1_total += static_cast<double>(adjusted[1][i]);
  }
  if (options.include_unk_in_support) {
    in_support[vocab.unk()] = 1;
    in_support[vocab.eos()] = 1;
  }
  size_t support_size = 0;
  for (char c : in_support) support_size += c;
  if (a1_total <= 0 || support_size == 0)
    throw NumericError("empty unigram table; nothing to train on");

  const KnDiscounts& d1 = model.discounts[1];
  size_t event_types = 0;
  for (size_t i = 0; i < uni.size(); ++i)
    if (uni.key(i)[0] != bos) ++event_types;
  double gamma1;
  if (d1.witten_bell) {
    gamma1 = static_cast<double>(event_types) /
             (a1_total + static_cast<double>(event_types));
  } else {
    double discounted = 0;
    for (size_t i = 0; i < uni.size(); ++i) {
      if (uni.key(i)[0] == bos) continue;
      double a = static_cast<double>(adjusted[1][i]);
      discounted += std::min(d1.of(adjusted[1][i]), a);
    }
    gamma1 = discounted / a1_total;
  }
  double uniform = 1.0 / static_cast<double>(support_size);

  std::vector<double> p1(vocab.size(), 0.0);
  for (WordId w = 0; w < vocab.size(); ++w)
    if (in_support[w]) p1[w] = gamma1 * uniform;
  for (size_t i = 0; i < uni.size(); ++i) {
    WordId w = uni.key(i)[0];
    if (w == bos) continue;
    double a = static_cast<double>(adjusted[1][i]);
    p1[w] += d1.witten_bell
                 ? a * (1.0 - gamma1) / a1_total
                 : std::max(a - d1.of(adjusted[1][i]), 0.0) / a1_total;
  }
  for (WordId w = 0; w < vocab.size(); ++w) {
    if (in_support[w]) {
      WordId key[1] = {w};
      model.table(1).append(key, std::log(p1[w]),
                            std::numeric_limits<double>::quiet_NaN());
    } else if (w == bos && n >= 2) {
      WordId key[1] = {w};
      model.table(1).append(key, kLogZero, std::numeric_limits<double>::quiet_NaN());
    }
  }

  // Higher orders: probabilities from discounted adjusted counts plus
  // leftover mass routed through the already-final lower orders.
  std::vector<WordId> ctxbuf;
  for (int k = 2; k <= n; ++k) {
    const OrderTable& ot = counts.order(k);
    const KnDiscounts& dk = model.discounts[k];
    ProbTable& lower = model.table(k - 1);

    // Contexts missing from the lower order (cutoff tables) get rows
    // carrying exactly the probability the backoff query implies.
    std::vector<std::vector<WordId>> missing;
    std::vector<double> missing_lp;
    for (size_t i = 0; i < ot.size();) {
      auto ctx = ot.key(i).subspan(0, k - 1);
      if (lower.find(ctx) == ProbTable::npos &&
          (missing.empty() ||
           OrderTable::compare(missing.back(), ctx) != 0)) {
        missing.emplace_back(ctx.begin(), ctx.end());
        missing_lp.push_back(
            ctx.back() == bos
                ? kLogZero
                : model.logprob({ctx.data(), ctx.size() - 1}, ctx.back()));
      }
      size_t j = i;
      while (j < ot.size() && ot.has_prefix(j, ctx)) ++j;
      i = j;
    }
    lower.merge_sorted(missing, missing_lp);

    for (size_t i = 0; i < ot.size();) {
      auto ctx = ot.key(i).subspan(0, k - 1);
      size_t j = i;
      double total = 0, disc_mass = 0;
      while (j < ot.size() && ot.has_prefix(j, ctx)) {
        double a = static_cast<double>(adjusted[k][j]);
        total += a;
        disc_mass += std::min(dk.of(adjusted[k][j]), a);
        ++j;
      }
      if (total <= 0) {
        i = j;
        continue;
      }
      double gamma = dk.witten_bell
                         ? static_cast<double>(j - i) /
                               (total + static_cast<double>(j - i))
                         : disc_mass / total;
      if (gamma <= 0) {
        gamma = options.backoff_floor;
        ++model.clamped_backoffs;
      }
      for (size_t r = i; r < j; ++r) {
        double a = static_cast<double>(adjusted[k][r]);
        WordId w = ot.key(r)[k - 1];
        double plow =
            std::exp(model.logprob(ot.key(r).subspan(1, k - 2), w));
        double num = dk.witten_bell
                         ? a * (1.0 - gamma)
                         : std::max(a - dk.of(adjusted[k][r]), 0.0);
        double p = num / total + gamma * plow;
        model.table(k).append(ot.key(r), std::log(p),
                              std::numeric_limits<double>::quiet_NaN());
      }
      size_t cidx = lower.find(ctx);
      assert(cidx != ProbTable::npos);
      lower.set_bow(cidx, std::log(gamma));
      i = j;
    }
  }
  return model;
}

}  // namespace relm
