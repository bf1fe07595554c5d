#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "relm/counts.hpp"
#include "relm/vocab.hpp"

namespace relm {

constexpr double kLn10 = 2.302585092994045684;
// ARPA sentinel for entries that exist only to carry a backoff weight.
constexpr double kLogZero = -99.0 * kLn10;

// One n-gram order of (log-probability, optional log-backoff) rows,
// keyed like OrderTable.  Keys stay sorted; the rare insertions needed
// for contexts absent from cutoff tables go through merge_sorted().
class ProbTable {
 public:
  explicit ProbTable(int order) : order_(order) {}

  int order() const { return order_; }
  size_t size() const { return logp_.size(); }
  std::span<const WordId> key(size_t i) const {
    return {keys_.data() + i * order_, static_cast<size_t>(order_)};
  }
  double logp(size_t i) const { return logp_[i]; }
  double bow(size_t i) const { return bow_[i]; }
  bool has_bow(size_t i) const { return !std::isnan(bow_[i]); }
  void set_bow(size_t i, double b) { bow_[i] = b; }
  void set_logp(size_t i, double p) { logp_[i] = p; }

  static constexpr size_t npos = static_cast<size_t>(-1);
  size_t find(std::span<const WordId> t) const {
    size_t lo = 0, hi = size();
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      int c = OrderTable::compare(key(mid), t);
      if (c < 0)
        lo = mid + 1;
      else if (c > 0)
        hi = mid;
      else
        return mid;
    }
    return npos;
  }

  // Rows must arrive in key order.
  void append(std::span<const WordId> t, double lp, double bw) {
    assert(keys_.empty() ||
           OrderTable::compare({keys_.data() + keys_.size() - order_,
                                static_cast<size_t>(order_)}, t) < 0);
    keys_.insert(keys_.end(), t.begin(), t.end());
    logp_.push_back(lp);
    bow_.push_back(bw);
  }

  // Merge additional sorted rows (no duplicates with existing keys).
  void merge_sorted(const std::vector<std::vector<WordId>>& keys,
                    const std::vector<double>& lps) {
    if (keys.empty()) return;
    std::vector<WordId> nk;
    nk.reserve(keys_.size() + keys.size() * order_);
    std::vector<double> np, nb;
    np.reserve(logp_.size() + keys.size());
    nb.reserve(bow_.size() + keys.size());
    size_t i = 0, j = 0;
    while (i < size() || j < keys.size()) {
      bool take_new =
          i >= size() ||
          (j < keys.size() && OrderTable::compare(keys[j], key(i)) < 0);
      if (take_new) {
        nk.insert(nk.end(), keys[j].begin(), keys[j].end());
        np.push_back(lps[j]);
        nb.push_back(std::numeric_limits<double>::quiet_NaN());
        ++j;
      } else {
        auto k = key(i);
        nk.insert(nk.end(), k.begin(), k.end());
        np.push_back(logp_[i]);
        nb.push_back(bow_[i]);
        ++i;
      }
    }
    keys_ = std::move(nk);
    logp_ = std::move(np);
    bow_ = std::move(nb);
  }

 private:
  int order_;
  std::vector<WordId> keys_;
  std::vector<double> logp_;
  std::vector<double> bow_;  // NaN when the row has no backoff weight
};

struct KnDiscounts {
  double d1 = 0, d2 = 0, d3plus = 0;
  // Witten-Bell fallback for orders whose counts-of-counts cannot
  // support the modified-KN formulas (closed symbol sets).
  bool witten_bell = false;
  double of(Count c) const {
    if (c == 0) return 0.0;
    if (c == 1) return d1;
    if (c == 2) return d2;
    return d3plus;
  }
};

// ARPA-style backoff model.  Natural log internally; log base 10 only
// at the serialization boundary.
class BackoffModel {
 public:
  BackoffModel(int order, Vocabulary vocab) : vocab_(std::move(vocab)) {
    for (int k = 1; k <= order; ++k) tables_.emplace_back(k);
  }

  int order() const { return static_cast<int>(tables_.size()); }
  const Vocabulary& vocab() const { return vocab_; }
  ProbTable& table(int k) { return tables_[k - 1]; }
  const ProbTable& table(int k) const { return tables_[k - 1]; }

  // Predictable words: unigram rows minus <s>.
  std::vector<WordId> support() const {
    std::vector<WordId> out;
    const ProbTable& uni = table(1);
    for (size_t i = 0; i < uni.size(); ++i) {
      WordId w = uni.key(i)[0];
      if (w != vocab_.bos()) out.push_back(w);
    }
    return out;
  }

  bool in_support(WordId w) const {
    WordId key[1] = {w};
    return table(1).find(key) != ProbTable::npos;
  }

  // Highest-order match with the backoff-weight chain applied.
  double logprob(std::span<const WordId> context, WordId word) const {
    if (!in_support(word)) {
      if (!in_support(vocab_.unk())) return kLogZero;
      word = vocab_.unk();
    }
    size_t maxlen = static_cast<size_t>(order() - 1);
    if (context.size() > maxlen) context = context.subspan(context.size() - maxlen);
    double bowsum = 0.0;
    std::vector<WordId> probe(context.begin(), context.end());
    probe.push_back(word);
    for (size_t k = context.size(); k > 0; --k) {
      std::span<const WordId> sub(probe.data() + (context.size() - k), k + 1);
      const ProbTable& pt = table(static_cast<int>(k) + 1);
      size_t idx = pt.find(sub);
      if (idx != ProbTable::npos) return pt.logp(idx) + bowsum;
      const ProbTable& ct = table(static_cast<int>(k));
      size_t cidx = ct.find(sub.subspan(0, k));
      if (cidx != ProbTable::npos && ct.has_bow(cidx)) bowsum += ct.bow(cidx);
    }
    WordId key[1] = {word};
    size_t idx = table(1).find(key);
    return table(1).logp(idx) + bowsum;
  }

  // Per-position log P(w_i | w_1..w_{i-1}) over a marked sequence.
  std::vector<double> word_logprobs_ids(const TokenSequence& seq) const {
    assert(seq.marked);
    std::vector<double> out;
    out.reserve(seq.ids.size() - 1);
    size_t ctxmax = static_cast<size_t>(order() - 1);
    for (size_t i = 1; i < seq.ids.size(); ++i) {
      size_t b = i > ctxmax ? i - ctxmax : 0;
      out.push_back(logprob({seq.ids.data() + b, i - b}, seq.ids[i]));
    }
    return out;
  }

  // Training metadata (not serialized).
  std::vector<KnDiscounts> discounts;
  std::string mode = "kn";
  size_t clamped_backoffs = 0;

 private:
  Vocabulary vocab_;
  std::vector<ProbTable> tables_;
};

}  // namespace relm
