#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "relm/nbest.hpp"
#include "relm/scorer.hpp"

namespace relm {

struct AddFeatureReport {
  size_t scored = 0;
  // segment id, decoder rank, reason
  std::vector<std::tuple<std::string, size_t, std::string>> failures;
};

// Adds the scorer's sentence log-probability (natural log) as a named
// feature column.  A hypothesis the scorer chokes on gets the list's
// minimum scored value minus the penalty instead of aborting the run.
inline void add_lm_feature(std::vector<NBestList>& lists, SentenceScorer& scorer,
                           const std::string& feature_name,
                           double fail_penalty = 100.0, unsigned threads = 1,
                           AddFeatureReport* report = nullptr) {
  AddFeatureReport local;
  AddFeatureReport& rep = report ? *report : local;
  for (NBestList& list : lists) {
    for (const Hypothesis& hyp : list.hyps)
      if (hyp.has_feature(feature_name))
        throw FormatError("feature already present: " + feature_name);
    scorer.prepare_segment(list.segment_id);

    std::vector<double> scores(list.hyps.size());
    std::vector<char> failed(list.hyps.size(), 0);
    std::vector<std::string> reasons(list.hyps.size());
    parallel_for(list.hyps.size(), threads, [&](size_t b, size_t e) {
      for (size_t i = b; i < e; ++i) {
        try {
          scores[i] = scorer.sentence_logprob(list.hyps[i].tokens);
        } catch (const std::exception& ex) {
          failed[i] = 1;
          reasons[i] = ex.what();
        }
      }
    });
    double min_scored = 0;
    bool any = false;
    for (size_t i = 0; i < scores.size(); ++i)
      if (!failed[i]) {
        min_scored = any ? std::min(min_scored, scores[i]) : scores[i];
        any = true;
      }
    for (size_t i = 0; i < list.hyps.size(); ++i) {
      if (failed[i]) {
        list.hyps[i].add_feature(feature_name, min_scored - fail_penalty);
        rep.failures.emplace_back(list.segment_id, list.hyps[i].decoder_rank,
                                  reasons[i]);
      } else {
        list.hyps[i].add_feature(feature_name, scores[i]);
        ++rep.scored;
      }
    }
  }
}

struct Ranking {
  std::vector<size_t> order;   // hypothesis indices, best first
  std::vector<double> scores;  // aligned with the list's hypotheses
  size_t best = 0;
};

// Ranks by the weighted feature sum; ties go to the lower original
// decoder rank.  Every feature must have a weight and every weight a
// feature.
inline Ranking loglinear_select(const NBestList& list, const WeightVector& weights) {
  if (list.hyps.empty()) throw FormatError("empty N-best list: " + list.segment_id);
  Ranking out;
  out.scores.resize(list.hyps.size());
  for (size_t i = 0; i < list.hyps.size(); ++i) {
    const Hypothesis& hyp = list.hyps[i];
    for (const auto& [name, value] : hyp.features)
      if (!weights.get(name))
        throw FormatError("no weight for feature '" + name + "' (segment " +
                          list.segment_id + ")");
    double score = 0;
    for (const auto& [name, lambda] : weights.weights) {
      auto h = hyp.feature(name);
      if (!h)
        throw FormatError("hypothesis " + list.segment_id + "#" +
                          std::to_string(hyp.decoder_rank) +
                          " is missing feature '" + name + "'");
      score += lambda * *h;
    }
    out.scores[i] = score;
  }
  out.order.resize(list.hyps.size());
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](size_t a, size_t b) {
    if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
    return list.hyps[a].decoder_rank < list.hyps[b].decoder_rank;
  });
  out.best = out.order.front();
  return out;
}

}  // namespace relm
