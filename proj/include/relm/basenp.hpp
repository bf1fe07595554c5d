#pragma once

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "relm/text.hpp"

namespace relm {

// Gap between adjacent words: start of a baseNP, continue, end, between
// two adjacent baseNPs, or between words outside any baseNP.
enum class GapTag : uint8_t { S, C, E, B, N };
constexpr std::array<GapTag, 5> kGapTags = {GapTag::S, GapTag::C, GapTag::E,
                                            GapTag::B, GapTag::N};

inline char gap_char(GapTag g) { return "SCEBN"[static_cast<int>(g)]; }

inline GapTag gap_from_char(char c) {
  switch (c) {
    case 'S': return GapTag::S;
    case 'C': return GapTag::C;
    case 'E': return GapTag::E;
    case 'B': return GapTag::B;
    case 'N': return GapTag::N;
  }
  throw FormatError(std::string("bad gap tag: ") + c);
}

// Bracketing automaton: from outside a baseNP only S (open) or N; from
// inside only C (stay), E (close) or B (close and reopen).
inline bool gap_valid_step(bool open, GapTag g) {
  if (open) return g == GapTag::C || g == GapTag::E || g == GapTag::B;
  return g == GapTag::S || g == GapTag::N;
}

inline bool valid_gap_sequence(std::span<const GapTag> gaps) {
  bool open = false;
  for (size_t i = 0; i < gaps.size(); ++i) {
    if (!gap_valid_step(open, gaps[i])) return false;
    open = gaps[i] == GapTag::S || gaps[i] == GapTag::C || gaps[i] == GapTag::B;
  }
  return true;
}

// Inclusive spans implied by a gap sequence (positions index the words
// the gaps precede; an NP still open at the end closes there).
inline std::vector<std::pair<int, int>> spans_from_gaps(std::span<const GapTag> gaps) {
  std::vector<std::pair<int, int>> spans;
  int start = -1;
  for (size_t i = 0; i < gaps.size(); ++i) {
    switch (gaps[i]) {
      case GapTag::S:
        start = static_cast<int>(i);
        break;
      case GapTag::B:
        spans.emplace_back(start, static_cast<int>(i) - 1);
        start = static_cast<int>(i);
        break;
      case GapTag::E:
        spans.emplace_back(start, static_cast<int>(i) - 1);
        start = -1;
        break;
      case GapTag::C:
      case GapTag::N:
        break;
    }
  }
  if (start >= 0) spans.emplace_back(start, static_cast<int>(gaps.size()) - 1);
  return spans;
}

// One token per line: "index TAB word TAB pos TAB gap TAB head TAB label",
// blank line between sentences.  Punctuation rows use "-" for the gap.
struct GoldSentence {
  std::vector<std::string> words;
  std::vector<std::string> pos;
  std::vector<std::string> gaps;   // "-" where not applicable
  std::vector<int> heads;          // -1 root, -2 unannotated
  std::vector<std::string> labels;
};

inline std::vector<GoldSentence> read_gold_file(const std::string& path) {
  std::vector<GoldSentence> out;
  GoldSentence cur;
  LineReader in(path);
  std::string line;
  size_t lineno = 0;
  auto flush = [&] {
    if (!cur.words.empty()) out.push_back(std::move(cur));
    cur = {};
  };
  while (in.next(line)) {
    ++lineno;
    if (strip(line).empty()) {
      flush();
      continue;
    }
    auto f = split_on(line, "\t");
    if (f.size() != 6)
      throw FormatError(path + ":" + std::to_string(lineno) + ": need 6 fields");
    uint64_t idx = 0;
    if (!parse_u64(f[0], idx) || idx != cur.words.size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": bad token index");
    cur.words.emplace_back(f[1]);
    cur.pos.emplace_back(f[2]);
    cur.gaps.emplace_back(f[3]);
    if (f[4] == "-") {
      cur.heads.push_back(-2);
    } else if (f[4] == "root") {
      cur.heads.push_back(-1);
    } else {
      uint64_t h = 0;
      if (!parse_u64(f[4], h))
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad head");
      cur.heads.push_back(static_cast<int>(h));
    }
    cur.labels.emplace_back(f[5]);
  }
  flush();
  return out;
}

// Chunker input: the gap lattice runs over the non-punctuation words;
// punctuation contributes the c_i feature and never joins a baseNP.
struct ChunkSentence {
  std::vector<std::string> words;
  std::vector<std::string> pos;
  std::vector<bool> punct;  // derived from the surface form by default

  static ChunkSentence make(std::vector<std::string> words,
                            std::vector<std::string> pos) {
    ChunkSentence s;
    s.punct.reserve(words.size());
    for (const auto& w : words) s.punct.push_back(is_punct_token(w));
    s.words = std::move(words);
    s.pos = std::move(pos);
    return s;
  }

  std::vector<int> content_positions() const {
    std::vector<int> out;
    for (size_t i = 0; i < words.size(); ++i)
      if (!punct[i]) out.push_back(static_cast<int>(i));
    return out;
  }

  // intra-sentence punctuation strictly between two full positions
  bool punct_between(int a, int b) const {
    for (int i = a + 1; i < b; ++i)
      if (punct[i] && !is_sentence_final_punct(words[i])) return true;
    return false;
  }
};

struct BaseNPAnalysis {
  std::vector<GapTag> gaps;                // over content positions
  std::vector<std::pair<int, int>> spans;  // full-sentence positions
  std::vector<int> heads;                  // one full position per span
  std::vector<int> reduced_positions;      // full positions kept
  std::vector<std::string> reduced_words;
  std::vector<std::string> reduced_pos;
  double logprob = 0;
};

// P(G_i | w_{i-1}, t_{i-1}, w_i, t_i, c_i) with Witten-Bell backoff
// through (full features) -> (POS pair, c) -> unconditioned -> uniform.
// The first gap of a sentence has probability 1 by definition.
class BaseNPModel {
 public:
  struct TrainReport {
    size_t sentences = 0;
    std::vector<std::pair<size_t, std::string>> rejected;
  };

  void observe(const std::string& wp, const std::string& tp,
               const std::string& wc, const std::string& tc, int ci, GapTag g) {
    bump(lvl1_[key5(wp, tp, wc, tc, ci)], g);
    bump(lvl2_[key3(tp, tc, ci)], g);
    bump(lvl0_, g);
  }

  double prob(const std::string& wp, const std::string& tp, const std::string& wc,
              const std::string& tc, int ci, GapTag g) const {
    double p = (lvl0_.counts[static_cast<int>(g)] + lvl0_.distinct * 0.2) /
               (lvl0_.total + lvl0_.distinct);
    if (lvl0_.total == 0) p = 0.2;
    p = interp(lvl2_, key3(tp, tc, ci), g, p);
    p = interp(lvl1_, key5(wp, tp, wc, tc, ci), g, p);
    return p;
  }

  size_t events() const { return lvl0_.total; }

  void write(const std::string& path) const {
    AtomicFile out(path);
    auto dump = [&](int level, const std::map<std::string, Cell>& table) {
      for (const auto& [k, cell] : table) {
        std::string line = std::to_string(level);
        line += '\t';
        line += k;
        for (int g = 0; g < 5; ++g) {
          line += g ? " " : "\t";
          line += std::to_string(cell.counts[g]);
        }
        line += '\n';
        out << line;
      }
    };
    std::string base = "0\t*";
    for (int g = 0; g < 5; ++g) {
      base += g ? " " : "\t";
      base += std::to_string(lvl0_.counts[g]);
    }
    out << base << "\n";
    dump(1, lvl1_);
    dump(2, lvl2_);
    out.commit();
  }

  static BaseNPModel read(const std::string& path) {
    BaseNPModel m;
    LineReader in(path);
    std::string line;
    size_t lineno = 0;
    while (in.next(line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_on(line, "\t");
      if (f.size() != 3)
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad row");
      auto nums = split_ws(f[2]);
      if (nums.size() != 5)
        throw FormatError(path + ":" + std::to_string(lineno) + ": need 5 counts");
      Cell cell;
      for (int g = 0; g < 5; ++g) {
        uint64_t v = 0;
        if (!parse_u64(nums[g], v)) throw FormatError(path + ": bad count");
        cell.counts[g] = v;
        cell.total += v;
        cell.distinct += v > 0;
      }
      if (f[0] == "0")
        m.lvl0_ = cell;
      else if (f[0] == "1")
        m.lvl1_[std::string(f[1])] = cell;
      else if (f[0] == "2")
        m.lvl2_[std::string(f[1])] = cell;
      else
        throw FormatError(path + ": bad level " + std::string(f[0]));
    }
    return m;
  }

 private:
  struct Cell {
    std::array<uint64_t, 5> counts = {0, 0, 0, 0, 0};
    uint64_t total = 0;
    uint32_t distinct = 0;
  };
  std::map<std::string, Cell> lvl1_, lvl2_;
  Cell lvl0_;

  static void bump(Cell& cell, GapTag g) {
    uint64_t& c = cell.counts[static_cast<int>(g)];
    cell.distinct += c == 0;
    ++c;
    ++cell.total;
  }
  static std::string key5(const std::string& wp, const std::string& tp,
                          const std::string& wc, const std::string& tc, int ci) {
    std::string k = wp;
    k += '\x1f';
    k += tp;
    k += '\x1f';
    k += wc;
    k += '\x1f';
    k += tc;
    k += '\x1f';
    k += char('0' + ci);
    return k;
  }
  static std::string key3(const std::string& tp, const std::string& tc, int ci) {
    std::string k = tp;
    k += '\x1f';
    k += tc;
    k += '\x1f';
    k += char('0' + ci);
    return k;
  }
  static double interp(const std::map<std::string, Cell>& table,
                       const std::string& key, GapTag g, double lower) {
    auto it = table.find(key);
    if (it == table.end() || it->second.total == 0) return lower;
    const Cell& cell = it->second;
    return (cell.counts[static_cast<int>(g)] + cell.distinct * lower) /
           (cell.total + cell.distinct);
  }
};

// Gold gap sequences run over content words; invalid sentences are
// rejected with diagnostics.
inline BaseNPModel train_basenp(const std::vector<GoldSentence>& gold,
                                BaseNPModel::TrainReport* report = nullptr) {
  BaseNPModel model;
  BaseNPModel::TrainReport local;
  BaseNPModel::TrainReport& rep = report ? *report : local;
  for (size_t si = 0; si < gold.size(); ++si) {
    const GoldSentence& sent = gold[si];
    ChunkSentence cs = ChunkSentence::make(sent.words, sent.pos);
    auto content = cs.content_positions();
    std::vector<GapTag> gaps;
    bool ok = true;
    for (int p : content) {
      if (sent.gaps[p].size() != 1) {
        ok = false;
        break;
      }
      try {
        gaps.push_back(gap_from_char(sent.gaps[p][0]));
      } catch (const FormatError&) {
        ok = false;
        break;
      }
    }
    if (!ok || !valid_gap_sequence(gaps)) {
      rep.rejected.emplace_back(si, "invalid gold gap sequence");
      continue;
    }
    ++rep.sentences;
    for (size_t i = 1; i < content.size(); ++i) {
      int prev = content[i - 1], curp = content[i];
      model.observe(sent.words[prev], sent.pos[prev], sent.words[curp],
                    sent.pos[curp], cs.punct_between(prev, curp) ? 1 : 0,
                    gaps[i]);
    }
  }
  if (model.events() == 0 && rep.sentences == 0)
    throw NumericError("no valid gap-tagged sentences to train on");
  return model;
}

namespace detail {

// Rightmost nominal token of the span, else the rightmost token.
inline int span_headword(const ChunkSentence& s, int lo, int hi) {
  for (int i = hi; i >= lo; --i) {
    if (s.punct[i]) continue;
    char c = s.pos[i].empty() ? 0 : s.pos[i][0];
    if (c == 'N' || c == 'n') return i;
  }
  for (int i = hi; i >= lo; --i)
    if (!s.punct[i]) return i;
  return hi;
}

}  // namespace detail

// Viterbi over valid gap sequences; ties prefer the earlier tag in the
// fixed order S < C < E < B < N.  Gaps crossing intra-sentence
// punctuation may not continue a baseNP.
inline BaseNPAnalysis tag_basenps(const BaseNPModel& model, const ChunkSentence& s) {
  BaseNPAnalysis out;
  auto content = s.content_positions();
  size_t m = content.size();
  if (m == 0) {
    out.reduced_positions.resize(s.words.size());
    for (size_t i = 0; i < s.words.size(); ++i)
      out.reduced_positions[i] = static_cast<int>(i);
    out.reduced_words = s.words;
    out.reduced_pos = s.pos;
    return out;
  }

  // states: 0 = outside an NP, 1 = inside; the first gap is free
  constexpr double kNeg = -1e300;
  struct Back {
    double score = kNeg;
    int prev_state = -1;
    GapTag tag = GapTag::N;
  };
  std::vector<std::array<Back, 2>> trellis(m);
  trellis[0][1] = {0.0, -1, GapTag::S};
  trellis[0][0] = {0.0, -1, GapTag::N};

  for (size_t i = 1; i < m; ++i) {
    int prev = content[i - 1], curp = content[i];
    int ci = s.punct_between(prev, curp) ? 1 : 0;
    for (GapTag g : kGapTags) {
      // an NP may not contain intra-sentence punctuation; adjacent NPs
      // around it (B) are fine
      if (ci == 1 && g == GapTag::C) continue;
      double lp = std::log(model.prob(s.words[prev], s.pos[prev], s.words[curp],
                                      s.pos[curp], ci, g));
      for (int from = 0; from < 2; ++from) {
        if (trellis[i - 1][from].score == kNeg) continue;
        if (!gap_valid_step(from == 1, g)) continue;
        int to = (g == GapTag::S || g == GapTag::C || g == GapTag::B) ? 1 : 0;
        double cand = trellis[i - 1][from].score + lp;
        if (cand > trellis[i][to].score) trellis[i][to] = {cand, from, g};
      }
    }
  }

  int state = trellis[m - 1][1].score > trellis[m - 1][0].score ? 1 : 0;
  if (trellis[m - 1][1].score == trellis[m - 1][0].score)
    state = trellis[m - 1][1].tag <= trellis[m - 1][0].tag ? 1 : 0;
  out.logprob = trellis[m - 1][state].score;
  out.gaps.resize(m);
  for (int i = static_cast<int>(m) - 1; i >= 0; --i) {
    out.gaps[i] = trellis[i][state].tag;
    state = trellis[i][state].prev_state;
  }

  // spans in content coordinates -> full-sentence coordinates
  for (auto [lo, hi] : spans_from_gaps(out.gaps))
    out.spans.emplace_back(content[lo], content[hi]);
  for (auto [lo, hi] : out.spans)
    out.heads.push_back(detail::span_headword(s, lo, hi));

  size_t span_at = 0;
  for (size_t i = 0; i < s.words.size(); ++i) {
    while (span_at < out.spans.size() &&
           static_cast<int>(i) > out.spans[span_at].second)
      ++span_at;
    bool in_span = span_at < out.spans.size() &&
                   static_cast<int>(i) >= out.spans[span_at].first &&
                   static_cast<int>(i) <= out.spans[span_at].second && !s.punct[i];
    if (!in_span || static_cast<int>(i) == out.heads[span_at]) {
      out.reduced_positions.push_back(static_cast<int>(i));
      out.reduced_words.push_back(s.words[i]);
      out.reduced_pos.push_back(s.pos[i]);
    }
  }
  return out;
}

}  // namespace relm
