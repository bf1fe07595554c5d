#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "relm/bleu.hpp"
#include "relm/rerank.hpp"

namespace relm {

struct MertOptions {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double edge_tol = 1e-4;    // minimum simplex edge before convergence
  int max_iters = 200;       // per restart
  int restarts = 8;
  uint64_t seed = 1;
  double initial_step = 0.2;
  double restart_spread = 0.5;  // perturbation scale for restarts > 0
  // Weight pinned to its initial value to remove the scale degree of
  // freedom; empty string optimizes every dimension.
  std::string fixed_feature = Hypothesis::kDecoderFeature;
};

struct MertResult {
  WeightVector weights;
  double best_bleu = 0;
  // iteration, best corpus BLEU so far, simplex edge
  std::vector<std::tuple<int, double, double>> trace;
  bool degenerate = false;
  size_t evaluations = 0;
};

// Nelder-Mead over the free weights, objective = corpus BLEU of the
// log-linear selection.  The surface is piecewise constant, so the
// search restarts from seeded perturbations and the best vertex ever
// visited wins.
inline MertResult mert_optimize(const std::vector<NBestList>& lists,
                                const std::vector<std::vector<std::string>>& references,
                                const WeightVector& init,
                                const MertOptions& options = {}) {
  if (lists.empty()) throw FormatError("MERT needs at least one N-best list");
  if (lists.size() != references.size())
    throw FormatError("MERT: segment count mismatch with references");
  for (const auto& list : lists)
    if (list.hyps.empty())
      throw FormatError("MERT: empty list for segment " + list.segment_id);

  MertResult result;
  result.weights = init;

  // constant objective: every list's hypotheses identical
  bool constant = true;
  for (const auto& list : lists) {
    for (const auto& hyp : list.hyps)
      if (hyp.tokens != list.hyps.front().tokens) {
        constant = false;
        break;
      }
    if (!constant) break;
  }

  std::vector<std::string> names;
  std::vector<double> base;
  for (const auto& [n, v] : init.weights) {
    if (n != options.fixed_feature) names.push_back(n);
    base.push_back(v);
  }
  if (names.empty())
    throw FormatError("MERT: no free weights to optimize");

  auto to_weights = [&](const std::vector<double>& x) {
    WeightVector w = init;
    for (size_t i = 0; i < names.size(); ++i) w.set(names[i], x[i]);
    return w;
  };
  auto objective = [&](const std::vector<double>& x) {
    WeightVector w = to_weights(x);
    std::vector<std::vector<std::string>> picks;
    picks.reserve(lists.size());
    for (const auto& list : lists)
      picks.push_back(list.hyps[loglinear_select(list, w).best].tokens);
    ++result.evaluations;
    return corpus_bleu(picks, references).score;
  };

  std::vector<double> start;
  for (const auto& n : names) start.push_back(*init.get(n));
  result.best_bleu = objective(start);
  std::vector<double> best_x = start;
  result.trace.emplace_back(0, result.best_bleu, 0.0);
  if (constant) {
    result.degenerate = true;
    return result;
  }

  size_t dims = names.size();
  int iteration = 0;
  for (int restart = 0; restart < options.restarts; ++restart) {
    Rng rng(options.seed + static_cast<uint64_t>(restart));
    std::uniform_real_distribution<double> jitter(-options.restart_spread,
                                                  options.restart_spread);
    std::vector<double> origin = restart == 0 ? start : best_x;
    if (restart > 0)
      for (double& v : origin) v += jitter(rng);

    // initial simplex: origin plus one step per dimension
    std::vector<std::vector<double>> simplex = {origin};
    for (size_t d = 0; d < dims; ++d) {
      auto v = origin;
      v[d] += options.initial_step;
      simplex.push_back(v);
    }
    std::vector<double> value(simplex.size());
    for (size_t i = 0; i < simplex.size(); ++i) value[i] = objective(simplex[i]);

    for (int iter = 0; iter < options.max_iters; ++iter) {
      ++iteration;
      // sort vertices, best first (maximization)
      std::vector<size_t> idx(simplex.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](size_t a, size_t b) { return value[a] > value[b]; });
      std::vector<std::vector<double>> sx;
      std::vector<double> sv;
      for (size_t i : idx) {
        sx.push_back(simplex[i]);
        sv.push_back(value[i]);
      }
      simplex = std::move(sx);
      value = std::move(sv);

      if (value[0] > result.best_bleu) {
        result.best_bleu = value[0];
        best_x = simplex[0];
      }
      double edge = 0;
      for (size_t i = 1; i < simplex.size(); ++i) {
        double d2 = 0;
        for (size_t d = 0; d < dims; ++d) {
          double diff = simplex[i][d] - simplex[0][d];
          d2 += diff * diff;
        }
        edge = std::max(edge, std::sqrt(d2));
      }
      result.trace.emplace_back(iteration, result.best_bleu, edge);
      if (edge < options.edge_tol) break;

      std::vector<double> centroid(dims, 0.0);
      for (size_t i = 0; i + 1 < simplex.size(); ++i)
        for (size_t d = 0; d < dims; ++d) centroid[d] += simplex[i][d];
      for (double& c : centroid) c /= static_cast<double>(dims);

      auto mix = [&](double t) {
        std::vector<double> v(dims);
        for (size_t d = 0; d < dims; ++d)
          v[d] = centroid[d] + t * (centroid[d] - simplex.back()[d]);
        return v;
      };
      auto reflected = mix(options.reflection);
      double fr = objective(reflected);
      if (fr > value[0]) {
        auto expanded = mix(options.expansion);
        double fe = objective(expanded);
        if (fe > fr) {
          simplex.back() = expanded;
          value.back() = fe;
        } else {
          simplex.back() = reflected;
          value.back() = fr;
        }
        continue;
      }
      if (fr > value[value.size() - 2]) {
        simplex.back() = reflected;
        value.back() = fr;
        continue;
      }
      auto contracted = mix(-options.contraction);
      double fc = objective(contracted);
      if (fc > value.back()) {
        simplex.back() = contracted;
        value.back() = fc;
        continue;
      }
      for (size_t i = 1; i < simplex.size(); ++i) {
        for (size_t d = 0; d < dims; ++d)
          simplex[i][d] =
              simplex[0][d] + options.shrink * (simplex[i][d] - simplex[0][d]);
        value[i] = objective(simplex[i]);
      }
    }
  }

  result.weights = to_weights(best_x);
  return result;
}

inline void write_mert_log(const MertResult& result, const std::string& path) {
  AtomicFile out(path);
  for (const auto& [iter, bleu, edge] : result.trace) {
    out << std::to_string(iter) << "\t" << format_double(bleu) << "\t"
        << format_double(edge) << "\n";
  }
  out.commit();
}

}  // namespace relm
