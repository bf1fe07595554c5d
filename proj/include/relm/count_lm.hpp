#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relm/counts.hpp"
#include "relm/scorer.hpp"

namespace relm {

// Interpolation weights bucketed by the highest-order history count.
// weights[b] = (lambda_n, ..., lambda_1, lambda_0), summing to 1.
struct JmWeights {
  int order = 0;
  std::vector<Count> bucket_lower;  // ascending, first entry 0
  std::vector<std::vector<double>> weights;

  size_t bucket_of(Count history_count) const {
    size_t b = 0;
    while (b + 1 < bucket_lower.size() && history_count >= bucket_lower[b + 1]) ++b;
    return b;
  }
  static std::vector<Count> default_buckets() {
    return {0, 1, 2, 4, 8, 16, 64, 256};
  }
};

// Jelinek-Mercer deleted-interpolation model computed straight off a
// count table; touches only n-grams of the scored text.  Zero-count
// history denominators contribute nothing and their weight mass is
// redistributed proportionally over the remaining orders.
class CountLM : public SentenceScorer {
 public:
  CountLM(std::shared_ptr<const NGramCountTable> table, Vocabulary vocab,
          JmWeights weights)
      : table_(std::move(table)), vocab_(std::move(vocab)), weights_(std::move(weights)) {
    order_ = table_->max_order();
    if (weights_.order != order_)
      throw FormatError("weight order does not match count table order");
    const OrderTable& uni = table_->order(1);
    in_support_.assign(vocab_.size(), false);
    for (size_t i = 0; i < uni.size(); ++i) {
      WordId w = uni.key(i)[0];
      if (w == vocab_.bos() || w >= in_support_.size()) continue;
      in_support_[w] = true;
    }
    in_support_[vocab_.unk()] = true;
    in_support_[vocab_.eos()] = true;
    support_ = 0;
    for (bool b : in_support_) support_ += b;
  }

  int order() const { return order_; }
  size_t support_size() const { return support_; }
  const NGramCountTable& table() const { return *table_; }
  const JmWeights& weights() const { return weights_; }
  const Vocabulary* vocabulary() const override { return &vocab_; }

  struct Densities {
    std::vector<double> f;     // index 0 = order n ... index n-1 = order 1
    std::vector<bool> valid;
    size_t bucket = 0;
  };

  // prefix carries the sentence so far including <s>.
  Densities densities(std::span<const WordId> prefix, WordId word) const {
    Densities d;
    d.f.assign(order_, 0.0);
    d.valid.assign(order_, false);
    std::vector<WordId> gram;
    for (int k = order_; k >= 1; --k) {
      size_t need = static_cast<size_t>(k - 1);
      int slot = order_ - k;
      if (need > prefix.size()) continue;
      auto h = prefix.subspan(prefix.size() - need);
      double denom;
      if (need == 0) {
        denom = static_cast<double>(table_->total_tokens());
      } else if (need == 1 && h[0] == vocab_.bos()) {
        denom = static_cast<double>(table_->sentence_count());
      } else {
        denom = static_cast<double>(table_->lookup(h));
      }
      if (denom <= 0) continue;
      gram.assign(h.begin(), h.end());
      gram.push_back(word);
      d.valid[slot] = true;
      d.f[slot] = static_cast<double>(table_->lookup(gram)) / denom;
    }
    size_t top_need = static_cast<size_t>(order_ - 1);
    Count hist = 0;
    if (top_need == 0) {
      hist = table_->total_tokens();
    } else if (top_need <= prefix.size()) {
      auto h = prefix.subspan(prefix.size() - top_need);
      hist = (top_need == 1 && h[0] == vocab_.bos()) ? table_->sentence_count()
                                                     : table_->lookup(h);
    }
    d.bucket = weights_.bucket_of(hist);
    return d;
  }

  bool in_support(WordId w) const {
    return w < in_support_.size() && in_support_[w];
  }

  double prob(std::span<const WordId> prefix, WordId word) const {
    if (!in_support(word)) word = vocab_.unk();
    Densities d = densities(prefix, word);
    const std::vector<double>& lam = weights_.weights[d.bucket];
    double floor = 1.0 / static_cast<double>(support_);
    double mass = lam[order_];  // lambda_0, always live
    double p = lam[order_] * floor;
    for (int slot = 0; slot < order_; ++slot) {
      if (!d.valid[slot]) continue;
      mass += lam[slot];
      p += lam[slot] * d.f[slot];
    }
    return p / mass;
  }

  double logprob(std::span<const WordId> prefix, WordId word) const {
    return std::log(prob(prefix, word));
  }

  std::vector<double> word_logprobs(std::span<const std::string> words) const override {
    std::vector<WordId> ids;
    ids.reserve(words.size() + 2);
    ids.push_back(vocab_.bos());
    for (const auto& w : words) ids.push_back(vocab_.lookup(w));
    ids.push_back(vocab_.eos());
    std::vector<double> out;
    out.reserve(ids.size() - 1);
    for (size_t i = 1; i < ids.size(); ++i)
      out.push_back(logprob({ids.data(), i}, ids[i]));
    return out;
  }

 private:
  std::shared_ptr<const NGramCountTable> table_;
  Vocabulary vocab_;
  JmWeights weights_;
  int order_ = 0;
  size_t support_ = 0;
  std::vector<bool> in_support_;
};

struct JmEstimate {
  JmWeights weights;
  std::vector<double> loglik_trace;  // non-decreasing across iterations
  std::vector<size_t> empty_buckets;
};

struct JmEstimateOptions {
  std::vector<Count> bucket_lower = JmWeights::default_buckets();
  double rel_tol = 1e-6;
  int max_iters = 200;
  // Starting point, lambda_n..lambda_0; uniform when absent.
  std::optional<std::vector<double>> init;
};

// EM on held-out likelihood.  The M-step is accepted only if it does
// not lower the held-out log-likelihood (the redistribution normalizer
// makes the plain update a heuristic there), so the trace is
// non-decreasing by construction.
inline JmEstimate estimate_jm_weights(
    std::shared_ptr<const NGramCountTable> table, const Vocabulary& vocab,
    const std::vector<TokenSequence>& heldout,
    const JmEstimateOptions& opts = {}) {
  int n = table->max_order();
  if (heldout.empty()) throw NumericError("empty held-out set");
  const std::vector<Count>& bucket_lower = opts.bucket_lower;
  JmWeights init;
  init.order = n;
  init.bucket_lower = bucket_lower;
  init.weights.assign(
      bucket_lower.size(),
      opts.init.value_or(std::vector<double>(n + 1, 1.0 / (n + 1))));
  CountLM probe(table, vocab, init);

  // Cache per-event densities once; EM then never touches the table.
  struct Event {
    CountLM::Densities d;
  };
  std::vector<Event> events;
  for (const auto& sent : heldout) {
    assert(sent.marked);
    for (size_t i = 1; i < sent.ids.size(); ++i)
      events.push_back({probe.densities({sent.ids.data(), i}, sent.ids[i])});
  }
  if (events.empty()) throw NumericError("held-out set has no prediction events");

  double floor = 1.0 / static_cast<double>(probe.support_size());
  size_t nb = bucket_lower.size();
  auto loglik = [&](const std::vector<std::vector<double>>& w) {
    double ll = 0;
    for (const Event& ev : events) {
      const std::vector<double>& lam = w[ev.d.bucket];
      double mass = lam[n], p = lam[n] * floor;
      for (int s = 0; s < n; ++s) {
        if (!ev.d.valid[s]) continue;
        mass += lam[s];
        p += lam[s] * ev.d.f[s];
      }
      ll += std::log(p / mass);
    }
    return ll;
  };

  std::vector<std::vector<double>> w = init.weights;
  JmEstimate out;
  out.loglik_trace.push_back(loglik(w));
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    std::vector<std::vector<double>> resp(nb, std::vector<double>(n + 1, 0.0));
    std::vector<double> bucket_events(nb, 0.0);
    for (const Event& ev : events) {
      const std::vector<double>& lam = w[ev.d.bucket];
      double t0 = lam[n] * floor, tsum = t0;
      std::vector<double> t(n, 0.0);
      for (int s = 0; s < n; ++s) {
        if (!ev.d.valid[s]) continue;
        t[s] = lam[s] * ev.d.f[s];
        tsum += t[s];
      }
      for (int s = 0; s < n; ++s) resp[ev.d.bucket][s] += t[s] / tsum;
      resp[ev.d.bucket][n] += t0 / tsum;
      bucket_events[ev.d.bucket] += 1.0;
    }
    std::vector<std::vector<double>> next = w;
    for (size_t b = 0; b < nb; ++b) {
      if (bucket_events[b] == 0) continue;
      for (int s = 0; s <= n; ++s) next[b][s] = resp[b][s] / bucket_events[b];
    }
    double ll = loglik(next);
    double prev = out.loglik_trace.back();
    if (ll < prev) break;  // keep the better weights; trace stays monotone
    w = std::move(next);
    out.loglik_trace.push_back(ll);
    if (std::abs(ll - prev) <= opts.rel_tol * std::abs(prev)) break;
  }

  // Buckets that saw no events inherit the nearest populated bucket.
  std::vector<bool> populated(nb, false);
  for (const Event& ev : events) populated[ev.d.bucket] = true;
  for (size_t b = 0; b < nb; ++b) {
    if (populated[b]) continue;
    out.empty_buckets.push_back(b);
    for (size_t d = 1; d < nb; ++d) {
      if (b >= d && populated[b - d]) {
        w[b] = w[b - d];
        break;
      }
      if (b + d < nb && populated[b + d]) {
        w[b] = w[b + d];
        break;
      }
    }
  }

  out.weights.order = n;
  out.weights.bucket_lower = bucket_lower;
  out.weights.weights = std::move(w);
  return out;
}

// "order TAB bucket_lower TAB lambda_n .. lambda_0"
inline void write_jm_weights(const JmWeights& w, const std::string& path) {
  AtomicFile out(path);
  for (size_t b = 0; b < w.bucket_lower.size(); ++b) {
    std::string line = std::to_string(w.order);
    line += '\t';
    line += std::to_string(w.bucket_lower[b]);
    line += '\t';
    for (size_t i = 0; i < w.weights[b].size(); ++i) {
      if (i) line += ' ';
      line += format_double(w.weights[b][i]);
    }
    line += '\n';
    out << line;
  }
  out.commit();
}

inline JmWeights read_jm_weights(const std::string& path) {
  JmWeights w;
  LineReader in(path);
  std::string line;
  while (in.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split_ws(line);
    if (f.size() < 4) throw FormatError(path + ": short weight row");
    int order = static_cast<int>(parse_double(f[0]));
    if (w.order == 0)
      w.order = order;
    else if (w.order != order)
      throw FormatError(path + ": inconsistent order column");
    uint64_t lower = 0;
    if (!parse_u64(f[1], lower)) throw FormatError(path + ": bad bucket bound");
    if (f.size() != static_cast<size_t>(order) + 3)
      throw FormatError(path + ": expected " + std::to_string(order + 1) + " weights");
    std::vector<double> lam;
    for (size_t i = 2; i < f.size(); ++i) lam.push_back(parse_double(f[i]));
    w.bucket_lower.push_back(lower);
    w.weights.push_back(std::move(lam));
  }
  if (w.weights.empty()) throw FormatError(path + ": no weight rows");
  return w;
}

}  // namespace relm
