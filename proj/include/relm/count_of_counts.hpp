#pragma once

#include <cmath>
#include <map>
#include <string>

#include "relm/counts.hpp"

namespace relm {

// F(c) = number of distinct k-grams with exactly count c.  Extrapolated
// entries remember the alpha that produced them.
struct CountOfCounts {
  struct Entry {
    double frequency = 0;
    bool extrapolated = false;
    double alpha = 0;
  };
  int order = 0;
  std::map<Count, Entry> entries;

  double frequency(Count c) const {
    auto it = entries.find(c);
    return it == entries.end() ? 0.0 : it->second.frequency;
  }
  bool has(Count c) const { return entries.count(c) != 0; }
  Count smallest_observed() const {
    for (const auto& [c, e] : entries)
      if (!e.extrapolated) return c;
    return 0;
  }

  static CountOfCounts from_table(const NGramCountTable& table, int order) {
    CountOfCounts coc;
    coc.order = order;
    const OrderTable& ot = table.order(order);
    for (size_t i = 0; i < ot.size(); ++i) coc.entries[ot.count(i)].frequency += 1;
    return coc;
  }
};

struct AlphaFit {
  double alpha = 0;
  double slope = 0;          // 1/alpha, the Fig.-1 line slope
  double residual_norm = 0;  // RMS of y_c - c/alpha over the fit range
};

struct IllConditionedFit : NumericError {
  Count offending_c;
  explicit IllConditionedFit(Count c, const std::string& what)
      : NumericError(what), offending_c(c) {}
};

// Least squares on the linearised law: y_c = 1/(log F(c) - log F(c+1))
// should lie on the line c/alpha.  Uses F on [lo, hi+1].
inline AlphaFit estimate_alpha(const CountOfCounts& coc, Count lo, Count hi) {
  if (hi < lo + 1) throw NumericError("alpha fit range must span >= 2 counts");
  double num = 0, den = 0;
  std::vector<std::pair<Count, double>> points;
  for (Count c = lo; c <= hi; ++c) {
    double fc = coc.frequency(c), fc1 = coc.frequency(c + 1);
    if (fc <= 0)
      throw IllConditionedFit(c, "F(" + std::to_string(c) + ") not observed");
    if (fc1 <= 0)
      throw IllConditionedFit(c + 1, "F(" + std::to_string(c + 1) + ") not observed");
    double d = std::log(fc) - std::log(fc1);
    if (d <= 0)
      throw IllConditionedFit(
          c, "F(" + std::to_string(c) + ") <= F(" + std::to_string(c + 1) +
                 "): log difference not positive");
    double y = 1.0 / d;
    points.emplace_back(c, y);
    num += static_cast<double>(c) * y;
    den += static_cast<double>(c) * static_cast<double>(c);
  }
  AlphaFit fit;
  fit.slope = num / den;
  if (fit.slope <= 0) throw IllConditionedFit(lo, "non-positive fitted slope");
  fit.alpha = 1.0 / fit.slope;
  double ss = 0;
  for (auto [c, y] : points) {
    double r = y - fit.slope * static_cast<double>(c);
    ss += r * r;
  }
  fit.residual_norm = std::sqrt(ss / static_cast<double>(points.size()));
  return fit;
}

struct ExtrapolationResult {
  CountOfCounts coc;
  bool extended = false;  // false: no-op warning (target not below observed)
};

// Iterates F(c) = F(c+1) * exp(alpha/c) downward to target_c.  Filled
// entries are rounded to the nearest positive integer.
inline ExtrapolationResult extrapolate_count_of_counts(const CountOfCounts& coc,
                                                       double alpha,
                                                       Count target_c) {
  if (alpha <= 0) throw NumericError("alpha must be positive");
  ExtrapolationResult res{coc, false};
  Count lowest = coc.smallest_observed();
  if (lowest == 0 || target_c >= lowest) return res;
  double f = coc.frequency(lowest);
  for (Count c = lowest - 1; ; --c) {
    f *= std::exp(alpha / static_cast<double>(c));
    if (c >= target_c && !res.coc.has(c)) {
      CountOfCounts::Entry e;
      e.frequency = std::max(1.0, std::round(f));
      e.extrapolated = true;
      e.alpha = alpha;
      res.coc.entries[c] = e;
      res.extended = true;
    }
    if (c == target_c || c == 1) break;
  }
  return res;
}

// "order TAB count_value TAB frequency TAB observed|extrapolated"
inline void write_count_of_counts(const CountOfCounts& coc, const std::string& path) {
  AtomicFile out(path);
  for (const auto& [c, e] : coc.entries) {
    out << std::to_string(coc.order) << "\t" << std::to_string(c) << "\t"
        << format_double(e.frequency) << "\t"
        << (e.extrapolated ? "extrapolated" : "observed") << "\n";
  }
  out.commit();
}

inline CountOfCounts read_count_of_counts(const std::string& path) {
  CountOfCounts coc;
  LineReader in(path);
  std::string line;
  size_t lineno = 0;
  while (in.next(line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split_on(line, "\t");
    if (f.size() != 4) throw FormatError(path + ":" + std::to_string(lineno) + ": bad row");
    coc.order = static_cast<int>(parse_double(f[0]));
    uint64_t c = 0;
    if (!parse_u64(f[1], c)) throw FormatError(path + ": bad count value");
    CountOfCounts::Entry e;
    e.frequency = parse_double(f[2]);
    e.extrapolated = f[3] == "extrapolated";
    coc.entries[c] = e;
  }
  return coc;
}

}  // namespace relm
