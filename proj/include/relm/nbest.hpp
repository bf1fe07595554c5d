#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relm/util.hpp"

namespace relm {

// One candidate translation: tokens plus a named feature-score map.
// The decoder score travels as the feature named "decoder".
struct Hypothesis {
  std::string segment_id;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::string, double>> features;
  size_t decoder_rank = 0;

  static constexpr const char* kDecoderFeature = "decoder";

  std::optional<double> feature(std::string_view name) const {
    for (const auto& [n, v] : features)
      if (n == name) return v;
    return std::nullopt;
  }
  bool has_feature(std::string_view name) const {
    return feature(name).has_value();
  }
  void add_feature(std::string name, double value) {
    if (has_feature(name))
      throw FormatError("feature already present: " + name);
    features.emplace_back(std::move(name), value);
  }
};

struct NBestList {
  std::string segment_id;
  std::string source;  // opaque, carried for bookkeeping only
  std::vector<Hypothesis> hyps;
};

// "segment_id ||| tokens ||| name=value ... ||| decoder_score" with an
// ignored trailing alignment field tolerated; segments contiguous.
inline std::vector<NBestList> read_nbest(const std::string& path,
                                         size_t max_size = 3000) {
  std::vector<NBestList> lists;
  LineReader in(path);
  std::string line;
  size_t lineno = 0;
  while (in.next(line)) {
    ++lineno;
    if (strip(line).empty()) continue;
    auto fields = split_on(line, " ||| ");
    if (fields.size() < 4)
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": need at least 4 ||| fields");
    Hypothesis hyp;
    hyp.segment_id = std::string(strip(fields[0]));
    if (hyp.segment_id.empty())
      throw FormatError(path + ":" + std::to_string(lineno) + ": empty segment id");
    for (auto tok : split_ws(fields[1])) hyp.tokens.emplace_back(tok);
    for (auto fv : split_ws(fields[2])) {
      size_t eq = fv.rfind('=');
      if (eq == std::string_view::npos)
        throw FormatError(path + ":" + std::to_string(lineno) +
                          ": feature without '=': " + std::string(fv));
      hyp.add_feature(std::string(fv.substr(0, eq)), parse_double(fv.substr(eq + 1)));
    }
    hyp.add_feature(Hypothesis::kDecoderFeature, parse_double(strip(fields[3])));
    // fields[4]: alignment, ignored
    if (lists.empty() || lists.back().segment_id != hyp.segment_id) {
      for (const auto& prior : lists)
        if (prior.segment_id == hyp.segment_id)
          throw FormatError(path + ": segment " + hyp.segment_id +
                            " is not contiguous");
      lists.push_back({hyp.segment_id, "", {}});
    }
    if (lists.back().hyps.size() < max_size) {
      hyp.decoder_rank = lists.back().hyps.size();
      lists.back().hyps.push_back(std::move(hyp));
    }
  }
  return lists;
}

inline void write_nbest(const std::vector<NBestList>& lists, const std::string& path) {
  AtomicFile out(path);
  std::string line;
  for (const NBestList& list : lists) {
    for (const Hypothesis& hyp : list.hyps) {
      line = list.segment_id;
      line += " ||| ";
      line += join(hyp.tokens.begin(), hyp.tokens.end(), " ");
      line += " ||| ";
      bool first = true;
      for (const auto& [name, value] : hyp.features) {
        if (name == Hypothesis::kDecoderFeature) continue;
        if (!first) line += ' ';
        line += name;
        line += '=';
        line += format_double(value);
        first = false;
      }
      line += " ||| ";
      line += format_double(hyp.feature(Hypothesis::kDecoderFeature).value_or(0.0));
      line += '\n';
      out << line;
    }
  }
  out.commit();
}

// "segment_id ||| chosen token sequence"
inline void write_selection(const std::vector<std::pair<std::string, std::string>>& rows,
                            const std::string& path) {
  AtomicFile out(path);
  for (const auto& [id, tokens] : rows) {
    out << id << " ||| " << tokens << "\n";
  }
  out.commit();
}

// Named log-linear scaling factors.
struct WeightVector {
  std::vector<std::pair<std::string, double>> weights;

  std::optional<double> get(std::string_view name) const {
    for (const auto& [n, v] : weights)
      if (n == name) return v;
    return std::nullopt;
  }
  void set(const std::string& name, double value) {
    for (auto& [n, v] : weights)
      if (n == name) {
        v = value;
        return;
      }
    weights.emplace_back(name, value);
  }

  void write(const std::string& path) const {
    AtomicFile out(path);
    for (const auto& [n, v] : weights) {
      out << n << "\t" << format_double(v) << "\n";
    }
    out.commit();
  }

  static WeightVector read(const std::string& path) {
    WeightVector w;
    LineReader in(path);
    std::string line;
    while (in.next(line)) {
      auto s = strip(line);
      if (s.empty() || s.front() == '#') continue;
      auto f = split_ws(s);
      if (f.size() != 2)
        throw FormatError(path + ": bad weight line: " + line);
      w.weights.emplace_back(std::string(f[0]), parse_double(f[1]));
    }
    return w;
  }
};

}  // namespace relm
