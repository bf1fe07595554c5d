#pragma once

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relm/util.hpp"

namespace relm {

// Corpus BLEU-4 sufficient statistics; additive across segments.
struct BleuStats {
  std::array<uint64_t, 4> matches = {0, 0, 0, 0};  // clipped
  std::array<uint64_t, 4> candidates = {0, 0, 0, 0};
  uint64_t candidate_length = 0;
  uint64_t reference_length = 0;

  BleuStats& operator+=(const BleuStats& o) {
    for (int k = 0; k < 4; ++k) {
      matches[k] += o.matches[k];
      candidates[k] += o.candidates[k];
    }
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    return *this;
  }
};

inline BleuStats bleu_stats(std::span<const std::string> candidate,
                            std::span<const std::string> reference) {
  BleuStats stats;
  stats.candidate_length = candidate.size();
  stats.reference_length = reference.size();
  for (int k = 1; k <= 4; ++k) {
    std::map<std::vector<std::string>, uint64_t> cand, ref;
    for (size_t i = 0; i + k <= candidate.size(); ++i)
      ++cand[{candidate.begin() + i, candidate.begin() + i + k}];
    for (size_t i = 0; i + k <= reference.size(); ++i)
      ++ref[{reference.begin() + i, reference.begin() + i + k}];
    uint64_t clipped = 0, total = 0;
    for (const auto& [gram, c] : cand) {
      auto it = ref.find(gram);
      clipped += std::min(c, it == ref.end() ? 0 : it->second);
      total += c;
    }
    stats.matches[k - 1] += clipped;
    stats.candidates[k - 1] += total;
  }
  return stats;
}

// Geometric mean of the clipped modified n-gram precisions times the
// brevity penalty; zero matches at any order zero out the corpus score.
inline double bleu_score(const BleuStats& stats) {
  if (stats.candidate_length == 0) return 0.0;
  double logp = 0;
  for (int k = 0; k < 4; ++k) {
    if (stats.matches[k] == 0 || stats.candidates[k] == 0) return 0.0;
    logp += std::log(static_cast<double>(stats.matches[k]) /
                     static_cast<double>(stats.candidates[k]));
  }
  logp /= 4.0;
  double bp = std::min(1.0, std::exp(1.0 - static_cast<double>(stats.reference_length) /
                                               static_cast<double>(stats.candidate_length)));
  return bp * std::exp(logp);
}

struct BleuResult {
  double score = 0;
  BleuStats stats;
};

inline BleuResult corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                              const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size())
    throw FormatError("BLEU: " + std::to_string(candidates.size()) +
                      " candidates vs " + std::to_string(references.size()) +
                      " references");
  BleuResult out;
  for (size_t i = 0; i < candidates.size(); ++i)
    out.stats += bleu_stats(candidates[i], references[i]);
  out.score = bleu_score(out.stats);
  return out;
}

}  // namespace relm
