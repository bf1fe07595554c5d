#pragma once

#include <string>
#include <vector>

#include "relm/dependency.hpp"
#include "relm/tag_lm.hpp"

namespace relm {

// P(W) ~ P(D|S-reduced) * P(B|W) * P(S,W): best tag sequence first, best
// baseNP bracketing second, dependency search over the reduced sentence
// last; punctuation heads by rule.
struct ParserScore {
  double total = 0;
  double tag_chain = 0;      // P(S,W): Viterbi path joint chain, log
  double chunk_logprob = 0;  // P(B|W), log
  double dep_logprob = 0;    // P(D|S-reduced), log
  std::vector<TagId> tags;
  BaseNPAnalysis chunks;
  DependencyAnalysis deps;
};

struct ParserLmOptions {
  int dep_beam = 64;      // <= 0 means exhaustive search
  double tag_beam = 1e-4; // forwarded to the joint model
};

class ParserLM : public SentenceScorer {
 public:
  ParserLM(const JointTagModel* tags, const BaseNPModel* chunker,
           const LinkModel* links, ParserLmOptions options = {})
      : tags_(tags), chunker_(chunker), links_(links), options_(options) {}

  ParserScore analyze(std::span<const std::string> words) const {
    ParserScore out;
    auto tag_score = taglm_score_sentence(*tags_, words, options_.tag_beam);
    out.tags = tag_score.tags;
    out.tag_chain = tag_score.viterbi_logprob;

    std::vector<std::string> pos;
    pos.reserve(words.size());
    for (TagId t : out.tags) pos.push_back(tags_->inventory().tag(t).category);
    ChunkSentence cs =
        ChunkSentence::make({words.begin(), words.end()}, std::move(pos));

    out.chunks = tag_basenps(*chunker_, cs);
    out.chunk_logprob = out.chunks.logprob;

    // dependency search over the content words of the reduced sentence
    std::vector<std::string> dep_cats;
    std::vector<int> content_slots;
    DependencyAnalysis dep;
    dep.punct.resize(out.chunks.reduced_words.size());
    dep.heads.assign(out.chunks.reduced_words.size(), -1);
    for (size_t i = 0; i < out.chunks.reduced_words.size(); ++i) {
      dep.punct[i] = is_punct_token(out.chunks.reduced_words[i]);
      if (!dep.punct[i]) {
        content_slots.push_back(static_cast<int>(i));
        dep_cats.push_back(out.chunks.reduced_pos[i]);
      }
    }
    std::vector<int> heads;
    out.dep_logprob =
        options_.dep_beam <= 0
            ? best_dependency_exhaustive(dep_cats, *links_, heads)
            : best_dependency_beam(dep_cats, *links_, options_.dep_beam, heads);
    for (size_t i = 0; i < heads.size(); ++i)
      dep.heads[content_slots[i]] =
          heads[i] < 0 ? -1 : content_slots[heads[i]];
    dep.logprob = out.dep_logprob;
    assign_punct_heads(dep, out.chunks.reduced_words);
    out.deps = std::move(dep);

    out.total = out.tag_chain + out.chunk_logprob + out.dep_logprob;
    return out;
  }

  double sentence_logprob(std::span<const std::string> words) const override {
    return analyze(words).total;
  }
  std::vector<double> word_logprobs(std::span<const std::string>) const override {
    throw NumericError("parser LM scores whole sentences only");
  }
  bool has_word_logprobs() const override { return false; }
  const Vocabulary* vocabulary() const override { return &tags_->word_vocab(); }

 private:
  const JointTagModel* tags_;
  const BaseNPModel* chunker_;
  const LinkModel* links_;
  ParserLmOptions options_;
};

}  // namespace relm
