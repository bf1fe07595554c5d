#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "relm/scorer.hpp"

namespace relm {

namespace detail {

inline std::vector<std::vector<double>> component_logprobs(
    const std::vector<const SentenceScorer*>& components,
    std::span<const std::string> words) {
  std::vector<std::vector<double>> out;
  out.reserve(components.size());
  for (const SentenceScorer* c : components) {
    out.push_back(c->word_logprobs(words));
    if (out.back().size() != out.front().size())
      throw NumericError("mixture components disagree on position count");
  }
  return out;
}

inline std::vector<double> interpolate(
    const std::vector<std::vector<double>>& lps, const std::vector<double>& w) {
  std::vector<double> out(lps.front().size());
  for (size_t i = 0; i < out.size(); ++i) {
    double p = 0;
    for (size_t c = 0; c < lps.size(); ++c) p += w[c] * std::exp(lps[c][i]);
    out[i] = std::log(p);
  }
  return out;
}

// Mixture-weight EM over fixed per-position densities; the held-out
// log-likelihood is non-decreasing (standard mixture EM).
inline std::vector<double> em_mixture_weights(
    const std::vector<std::vector<double>>& lps, std::vector<double> w,
    double rel_tol = 1e-6, int max_iters = 200) {
  size_t n = lps.front().size(), m = lps.size();
  std::vector<std::vector<double>> dens(m, std::vector<double>(n));
  for (size_t c = 0; c < m; ++c)
    for (size_t i = 0; i < n; ++i) dens[c][i] = std::exp(lps[c][i]);
  auto loglik = [&](const std::vector<double>& wv) {
    double ll = 0;
    for (size_t i = 0; i < n; ++i) {
      double p = 0;
      for (size_t c = 0; c < m; ++c) p += wv[c] * dens[c][i];
      ll += std::log(p);
    }
    return ll;
  };
  double prev = loglik(w);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<double> resp(m, 0.0);
    for (size_t i = 0; i < n; ++i) {
      double p = 0;
      for (size_t c = 0; c < m; ++c) p += w[c] * dens[c][i];
      for (size_t c = 0; c < m; ++c) resp[c] += w[c] * dens[c][i] / p;
    }
    std::vector<double> next(m);
    for (size_t c = 0; c < m; ++c) next[c] = resp[c] / static_cast<double>(n);
    double ll = loglik(next);
    if (ll < prev) break;
    w = std::move(next);
    if (std::abs(ll - prev) <= rel_tol * std::abs(prev)) break;
    prev = ll;
  }
  return w;
}

}  // namespace detail

// Fixed linear interpolation of component word probabilities.
class StaticMixture : public SentenceScorer {
 public:
  StaticMixture(std::vector<const SentenceScorer*> components,
                std::vector<double> weights)
      : components_(std::move(components)), weights_(std::move(weights)) {
    if (components_.size() != weights_.size() || components_.empty())
      throw NumericError("mixture needs one weight per component");
    double sum = 0;
    for (double v : weights_) {
      if (v < 0) throw NumericError("mixture weights must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw NumericError("mixture weights must sum to 1");
    for (const SentenceScorer* c : components_)
      if (!c->has_word_logprobs())
        throw NumericError("mixture components need per-word scores");
  }

  std::vector<double> word_logprobs(std::span<const std::string> words) const override {
    return detail::interpolate(detail::component_logprobs(components_, words),
                               weights_);
  }
  const Vocabulary* vocabulary() const override {
    return components_.front()->vocabulary();
  }

 private:
  std::vector<const SentenceScorer*> components_;
  std::vector<double> weights_;
};

// Per-segment weights fit by EM on that segment's 1-best hypothesis;
// segments without adaptation text fall back to the static weights.
class DynamicMixture : public SentenceScorer {
 public:
  DynamicMixture(std::vector<const SentenceScorer*> components,
                 std::vector<double> fallback,
                 std::map<std::string, std::vector<std::string>> adaptation)
      : components_(std::move(components)),
        fallback_(std::move(fallback)),
        adaptation_(std::move(adaptation)),
        current_(fallback_) {
    StaticMixture check(components_, fallback_);  // validates inputs
  }

  void prepare_segment(const std::string& segment_id) override {
    auto it = adaptation_.find(segment_id);
    if (it == adaptation_.end()) {
      ++missing_segments_;
      current_ = fallback_;
      return;
    }
    auto lps = detail::component_logprobs(components_, it->second);
    current_ = detail::em_mixture_weights(lps, fallback_);
  }

  std::vector<double> word_logprobs(std::span<const std::string> words) const override {
    return detail::interpolate(detail::component_logprobs(components_, words),
                               current_);
  }
  const Vocabulary* vocabulary() const override {
    return components_.front()->vocabulary();
  }

  const std::vector<double>& current_weights() const { return current_; }
  size_t missing_segments() const { return missing_segments_; }

 private:
  std::vector<const SentenceScorer*> components_;
  std::vector<double> fallback_;
  std::map<std::string, std::vector<std::string>> adaptation_;
  std::vector<double> current_;
  size_t missing_segments_ = 0;
};

}  // namespace relm
