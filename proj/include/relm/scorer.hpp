#pragma once

#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "relm/backoff_model.hpp"

namespace relm {

// A sentence scorer owns its vocabulary and boundary conventions; it
// receives plain tokens.  Scorers that can expose per-position
// conditionals (needed by mixtures and skip-OOV perplexity) say so via
// has_word_logprobs().
class SentenceScorer {
 public:
  virtual ~SentenceScorer() = default;

  virtual double sentence_logprob(std::span<const std::string> words) const {
    auto lps = word_logprobs(words);
    return std::accumulate(lps.begin(), lps.end(), 0.0);
  }
  // One entry per predicted position: every real token plus sentence-end.
  virtual std::vector<double> word_logprobs(std::span<const std::string> words) const = 0;
  virtual bool has_word_logprobs() const { return true; }
  virtual const Vocabulary* vocabulary() const { return nullptr; }
  // Hook for scorers that adapt per N-best segment.
  virtual void prepare_segment(const std::string& /*segment_id*/) {}
};

class BackoffScorer : public SentenceScorer {
 public:
  explicit BackoffScorer(const BackoffModel* model) : model_(model) {}

  std::vector<double> word_logprobs(std::span<const std::string> words) const override {
    TokenSequence seq;
    seq.marked = true;
    seq.ids.reserve(words.size() + 2);
    seq.ids.push_back(model_->vocab().bos());
    for (const auto& w : words) seq.ids.push_back(model_->vocab().lookup(w));
    seq.ids.push_back(model_->vocab().eos());
    return model_->word_logprobs_ids(seq);
  }
  const Vocabulary* vocabulary() const override { return &model_->vocab(); }

 private:
  const BackoffModel* model_;
};

enum class OovMode { kOpenVocabulary, kSkip };

struct PerplexityReport {
  double logprob = 0;       // natural log
  size_t sentences = 0;
  size_t predicted = 0;     // scored prediction events
  size_t oov = 0;           // tokens outside the scorer vocabulary
  size_t skipped = 0;       // predictions excluded in skip mode
  double perplexity = 0;
};

// exp(-(1/N) sum log P) with N counting every scored prediction
// including sentence-end.  Open-vocabulary mode scores OOVs through the
// unknown symbol; skip mode excludes their prediction events.
inline PerplexityReport perplexity(const SentenceScorer& scorer,
                                   const std::vector<std::vector<std::string>>& corpus,
                                   OovMode mode = OovMode::kOpenVocabulary) {
  if (mode == OovMode::kSkip && !scorer.has_word_logprobs())
    throw NumericError("skip-OOV perplexity needs per-word scores");
  PerplexityReport rep;
  const Vocabulary* vocab = scorer.vocabulary();
  for (const auto& sent : corpus) {
    if (sent.empty()) continue;
    ++rep.sentences;
    std::vector<bool> oov(sent.size(), false);
    for (size_t i = 0; i < sent.size(); ++i) {
      oov[i] = vocab && !vocab->contains(sent[i]);
      if (oov[i]) ++rep.oov;
    }
    if (mode == OovMode::kOpenVocabulary && !scorer.has_word_logprobs()) {
      rep.logprob += scorer.sentence_logprob(sent);
      rep.predicted += sent.size() + 1;
      continue;
    }
    auto lps = scorer.word_logprobs(sent);
    for (size_t i = 0; i < lps.size(); ++i) {
      bool is_oov = i < sent.size() && oov[i];
      if (mode == OovMode::kSkip && is_oov) {
        ++rep.skipped;
        continue;
      }
      rep.logprob += lps[i];
      ++rep.predicted;
    }
  }
  if (rep.predicted == 0)
    throw NumericError("perplexity undefined: zero predicted tokens");
  rep.perplexity = std::exp(-rep.logprob / static_cast<double>(rep.predicted));
  return rep;
}

}  // namespace relm
