#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "relm/basenp.hpp"
#include "relm/counts.hpp"

namespace relm {

inline int distance_bucket(int dist) {
  if (dist <= 1) return 0;
  if (dist == 2) return 1;
  if (dist <= 4) return 2;
  return 3;
}

// First-order link model: P(direction, distance bucket, head category |
// dependent category), relative frequencies with Witten-Bell backoff to
// (dependent category, direction) and a uniform base.
class LinkModel {
 public:
  void observe(const std::string& dep_cat, const std::string& head_cat,
               bool head_right, int dist) {
    categories_.insert(dep_cat);
    categories_.insert(head_cat);
    std::string full = key(dep_cat, head_right, distance_bucket(dist), head_cat);
    auto& cell = full_[full];
    dep_state(dep_cat).distinct += cell == 0;
    ++cell;
    ++dep_state(dep_cat).total;
    ++depdir_[dep_cat + (head_right ? "\x1fR" : "\x1fL")];
  }

  size_t category_count() const { return categories_.size(); }
  size_t events() const {
    size_t n = 0;
    for (const auto& [k, st] : dep_) n += st.total;
    return n;
  }

  double link_logprob(const std::string& dep_cat, const std::string& head_cat,
                      bool head_right, int dist) const {
    size_t ncat = std::max<size_t>(categories_.size(), 1);
    double p3 = 1.0 / (2.0 * 4.0 * static_cast<double>(ncat));
    auto dep_it = dep_.find(dep_cat);
    if (dep_it == dep_.end()) return std::log(p3);
    double dep_total = static_cast<double>(dep_it->second.total);
    auto dd = depdir_.find(dep_cat + (head_right ? "\x1fR" : "\x1fL"));
    double cdd = dd == depdir_.end() ? 0.0 : static_cast<double>(dd->second);
    // add-half keeps the direction marginal proper and never zero
    double p2 = (cdd + 0.5) / (dep_total + 1.0) * 0.25 /
                static_cast<double>(ncat);
    auto full = full_.find(key(dep_cat, head_right, distance_bucket(dist), head_cat));
    double cfull = full == full_.end() ? 0.0 : static_cast<double>(full->second);
    double T = dep_it->second.distinct;
    return std::log((cfull + T * p2) / (dep_total + T));
  }

  void write(const std::string& path) const {
    AtomicFile out(path);
    for (const auto& c : categories_) out << "cat\t" << c << "\n";
    std::map<std::string, Count> sorted(full_.begin(), full_.end());
    for (const auto& [k, v] : sorted)
      out << "link\t" << k << "\t" << std::to_string(v) << "\n";
    out.commit();
  }

  static LinkModel read(const std::string& path) {
    LinkModel m;
    LineReader in(path);
    std::string line;
    while (in.next(line)) {
      if (line.empty()) continue;
      auto f = split_on(line, "\t");
      if (f[0] == "cat" && f.size() == 2) {
        m.categories_.insert(std::string(f[1]));
        continue;
      }
      if (f[0] != "link" || f.size() != 3)
        throw FormatError(path + ": bad link model row: " + line);
      uint64_t v = 0;
      if (!parse_u64(f[2], v)) throw FormatError(path + ": bad count");
      auto parts = split_on(f[1], "\x1f");
      if (parts.size() != 4) throw FormatError(path + ": bad link key");
      std::string dep(parts[0]);
      auto& cell = m.full_[std::string(f[1])];
      m.dep_state(dep).distinct += cell == 0;
      cell += v;
      m.dep_state(dep).total += v;
      m.depdir_[dep + "\x1f" + std::string(parts[1])] += v;
    }
    return m;
  }

 private:
  struct DepState {
    uint64_t total = 0;
    uint32_t distinct = 0;
  };
  std::unordered_map<std::string, Count> full_;
  std::unordered_map<std::string, Count> depdir_;
  std::unordered_map<std::string, DepState> dep_;
  std::set<std::string> categories_;

  DepState& dep_state(const std::string& dep) { return dep_[dep]; }
  static std::string key(const std::string& dep, bool right, int bucket,
                         const std::string& head) {
    std::string k = dep;
    k += right ? "\x1fR\x1f" : "\x1fL\x1f";
    k += char('0' + bucket);
    k += '\x1f';
    k += head;
    return k;
  }
};

// Links between content words of the gold sentences; punctuation rows
// and punctuation-headed links are rule territory, not statistics.
inline LinkModel train_linkmodel(const std::vector<GoldSentence>& gold) {
  LinkModel model;
  for (const GoldSentence& sent : gold) {
    ChunkSentence cs = ChunkSentence::make(sent.words, sent.pos);
    for (size_t i = 0; i < sent.words.size(); ++i) {
      int h = sent.heads[i];
      if (cs.punct[i] || h < 0) continue;
      if (h >= static_cast<int>(sent.words.size()) || cs.punct[h]) continue;
      model.observe(sent.pos[i], sent.pos[h], h > static_cast<int>(i),
                    std::abs(h - static_cast<int>(i)));
    }
  }
  return model;
}

// Dependency structure over a reduced sentence.  heads[i] == -1 marks
// the root; punctuation heads are assigned by rule afterwards.
struct DependencyAnalysis {
  std::vector<int> heads;
  std::vector<bool> punct;
  std::vector<int> punct_rule;  // 0 none, 1 final->root, 2 following, 3 preceding
  double logprob = 0;
};

namespace detail {

inline bool creates_cycle(const std::vector<int>& heads, int dep, int head) {
  int at = head;
  while (at >= 0 && at < static_cast<int>(heads.size())) {
    if (at == dep) return true;
    at = heads[at];
  }
  return false;
}

}  // namespace detail

// Exhaustive maximization over single-root acyclic head assignments for
// the content positions; the oracle mode for the beam search.
inline double best_dependency_exhaustive(std::span<const std::string> cats,
                                         const LinkModel& model,
                                         std::vector<int>& best_heads) {
  size_t n = cats.size();
  std::vector<int> heads(n, -2);
  best_heads.assign(n, -1);
  double best = -1e300;
  if (n == 0) return 0.0;

  std::vector<int> stack;
  auto rec = [&](auto&& self, size_t i, int roots, double score) -> void {
    if (i == n) {
      if (roots != 1) return;
      if (score > best) {
        best = score;
        best_heads = heads;
      }
      return;
    }
    for (int h = -1; h < static_cast<int>(n); ++h) {
      if (h == static_cast<int>(i)) continue;
      if (h == -1) {
        if (roots == 1) continue;
        heads[i] = -1;
        self(self, i + 1, roots + 1, score);
        heads[i] = -2;
        continue;
      }
      heads[i] = -2;
      if (detail::creates_cycle(heads, static_cast<int>(i), h)) continue;
      heads[i] = h;
      double lp = model.link_logprob(cats[i], cats[h], h > static_cast<int>(i),
                                     std::abs(h - static_cast<int>(i)));
      self(self, i + 1, roots, score + lp);
      heads[i] = -2;
    }
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

// Left-to-right beam over head assignments with the single-root and
// acyclicity constraints enforced incrementally.
inline double best_dependency_beam(std::span<const std::string> cats,
                                   const LinkModel& model, int width,
                                   std::vector<int>& best_heads) {
  size_t n = cats.size();
  best_heads.assign(n, -1);
  if (n == 0) return 0.0;
  struct State {
    std::vector<int> heads;
    int roots = 0;
    double score = 0;
  };
  std::vector<State> beam = {{std::vector<int>(n, -2), 0, 0.0}};
  for (size_t i = 0; i < n; ++i) {
    std::vector<State> next;
    for (const State& st : beam) {
      for (int h = -1; h < static_cast<int>(n); ++h) {
        if (h == static_cast<int>(i)) continue;
        if (h == -1) {
          if (st.roots == 1) continue;
          State ns = st;
          ns.heads[i] = -1;
          ns.roots = 1;
          next.push_back(std::move(ns));
          continue;
        }
        if (detail::creates_cycle(st.heads, static_cast<int>(i), h)) continue;
        State ns = st;
        ns.heads[i] = h;
        ns.score += model.link_logprob(cats[i], cats[h], h > static_cast<int>(i),
                                       std::abs(h - static_cast<int>(i)));
        next.push_back(std::move(ns));
      }
    }
    std::sort(next.begin(), next.end(), [](const State& a, const State& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.heads < b.heads;
    });
    if (static_cast<int>(next.size()) > width) next.resize(width);
    beam = std::move(next);
  }
  for (const State& st : beam) {
    if (st.roots != 1) continue;
    best_heads = st.heads;
    return st.score;
  }
  // no single-root state survived the beam; fall back to all-root-0
  std::fill(best_heads.begin(), best_heads.end(), 0);
  best_heads[0] = -1;
  double score = 0;
  for (size_t i = 1; i < n; ++i)
    score += model.link_logprob(cats[i], cats[0], false, static_cast<int>(i));
  return score;
}

namespace detail {

inline int depth_to_root(const std::vector<int>& heads, int at) {
  int d = 0;
  while (at >= 0 && heads[at] >= 0 && d <= static_cast<int>(heads.size())) {
    at = heads[at];
    ++d;
  }
  return d;
}

// Headword of a phrase segment: the word whose head falls outside the
// segment (or the root); several candidates resolve by depth, then by
// position.
inline int segment_headword(const DependencyAnalysis& dep, int lo, int hi) {
  int best = -1, best_depth = 1 << 30;
  for (int i = lo; i <= hi; ++i) {
    if (dep.punct[i]) continue;
    int h = dep.heads[i];
    bool external = h < 0 || h < lo || h > hi;
    if (!external) continue;
    int d = depth_to_root(dep.heads, i);
    if (d < best_depth) {
      best_depth = d;
      best = i;
    }
  }
  if (best >= 0) return best;
  for (int i = lo; i <= hi; ++i)
    if (!dep.punct[i]) return i;
  return -1;
}

}  // namespace detail

// Punctuation attachment: sentence-final marks head to the root;
// intra-sentence marks head to the following phrase's headword, or the
// preceding phrase's when the sentence ends without one.  Phrases are
// the runs between punctuation marks of the reduced sentence.
inline void assign_punct_heads(DependencyAnalysis& dep,
                               const std::vector<std::string>& words) {
  size_t n = words.size();
  dep.punct_rule.assign(n, 0);
  int root = -1;
  for (size_t i = 0; i < n; ++i)
    if (!dep.punct[i] && dep.heads[i] == -1) root = static_cast<int>(i);

  for (size_t i = 0; i < n; ++i) {
    if (!dep.punct[i]) continue;
    if (is_sentence_final_punct(words[i])) {
      dep.heads[i] = root;
      dep.punct_rule[i] = 1;
      continue;
    }
    // following phrase: the next run of content words
    int lo = static_cast<int>(i) + 1;
    while (lo < static_cast<int>(n) && dep.punct[lo]) ++lo;
    if (lo < static_cast<int>(n)) {
      int hi = lo;
      while (hi + 1 < static_cast<int>(n) && !dep.punct[hi + 1]) ++hi;
      dep.heads[i] = detail::segment_headword(dep, lo, hi);
      dep.punct_rule[i] = 2;
      continue;
    }
    // incomplete sentence: fall back to the preceding phrase
    int hi = static_cast<int>(i) - 1;
    while (hi >= 0 && dep.punct[hi]) --hi;
    if (hi >= 0) {
      int lo2 = hi;
      while (lo2 - 1 >= 0 && !dep.punct[lo2 - 1]) --lo2;
      dep.heads[i] = detail::segment_headword(dep, lo2, hi);
      dep.punct_rule[i] = 3;
    } else {
      dep.heads[i] = root;
      dep.punct_rule[i] = 1;
    }
  }
}

}  // namespace relm
