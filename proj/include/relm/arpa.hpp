#pragma once

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "relm/backoff_model.hpp"

namespace relm {

// Standard ARPA backoff format: log base 10, 6 decimal places,
// "logprob<TAB>tokens[<TAB>backoff]" rows.  Writing then reading then
// writing again is byte-identical.
inline void write_arpa(const BackoffModel& model, const std::string& path) {
  AtomicFile out(path);
  char buf[64];
  out << "\\data\\\n";
  for (int k = 1; k <= model.order(); ++k) {
    snprintf(buf, sizeof buf, "ngram %d=%zu\n", k, model.table(k).size());
    out << buf;
  }
  std::string line;
  for (int k = 1; k <= model.order(); ++k) {
    out << "\n\\" << std::to_string(k) << "-grams:\n";
    const ProbTable& pt = model.table(k);
    for (size_t i = 0; i < pt.size(); ++i) {
      snprintf(buf, sizeof buf, "%.6f", pt.logp(i) / kLn10);
      line = buf;
      line += '\t';
      bool first = true;
      for (WordId w : pt.key(i)) {
        if (!first) line += ' ';
        line += model.vocab().token(w);
        first = false;
      }
      if (pt.has_bow(i)) {
        snprintf(buf, sizeof buf, "\t%.6f", pt.bow(i) / kLn10);
        line += buf;
      }
      line += '\n';
      out << line;
    }
  }
  out << "\n\\end\\\n";
  out.commit();
}

inline BackoffModel read_arpa(const std::string& path) {
  LineReader in(path);
  std::string line;
  while (in.next(line) && strip(line) != "\\data\\") {
  }
  if (strip(line) != "\\data\\") throw FormatError(path + ": missing \\data\\ header");
  std::vector<size_t> ngram_counts;
  while (in.next(line)) {
    auto s = strip(line);
    if (s.empty()) break;
    int k = 0;
    uint64_t c = 0;
    if (sscanf(std::string(s).c_str(), "ngram %d=%" SCNu64, &k, &c) != 2)
      throw FormatError(path + ": bad ngram count line: " + line);
    if (k != static_cast<int>(ngram_counts.size()) + 1)
      throw FormatError(path + ": non-consecutive ngram orders");
    ngram_counts.push_back(c);
  }
  if (ngram_counts.empty()) throw FormatError(path + ": no ngram counts");
  int order = static_cast<int>(ngram_counts.size());

  Vocabulary vocab;
  struct Row {
    std::vector<WordId> key;
    double logp, bow;
  };
  std::vector<std::vector<Row>> rows(order + 1);

  int cur = 0;
  while (in.next(line)) {
    auto s = strip(line);
    if (s.empty()) continue;
    if (s == "\\end\\") break;
    if (s.front() == '\\') {
      int k = 0;
      if (sscanf(std::string(s).c_str(), "\\%d-grams:", &k) != 1 || k < 1 || k > order)
        throw FormatError(path + ": unexpected section: " + line);
      cur = k;
      continue;
    }
    if (cur == 0) throw FormatError(path + ": row outside any section");
    auto fields = split_ws(s);
    if (fields.size() < static_cast<size_t>(cur) + 1)
      throw FormatError(path + ": short row: " + line);
    bool has_bow = fields.size() == static_cast<size_t>(cur) + 2;
    if (!has_bow && fields.size() != static_cast<size_t>(cur) + 1)
      throw FormatError(path + ": bad row arity: " + line);
    Row row;
    row.logp = parse_double(fields[0]) * kLn10;
    for (int i = 0; i < cur; ++i) row.key.push_back(vocab.add(fields[1 + i]));
    row.bow = has_bow ? parse_double(fields.back()) * kLn10
                      : std::numeric_limits<double>::quiet_NaN();
    rows[cur].push_back(std::move(row));
  }

  BackoffModel model(order, vocab);
  for (int k = 1; k <= order; ++k) {
    if (rows[k].size() != ngram_counts[k - 1])
      throw FormatError(path + ": section " + std::to_string(k) + " has " +
                        std::to_string(rows[k].size()) + " rows, header says " +
                        std::to_string(ngram_counts[k - 1]));
    std::sort(rows[k].begin(), rows[k].end(), [](const Row& a, const Row& b) {
      return OrderTable::compare(a.key, b.key) < 0;
    });
    for (const Row& r : rows[k]) model.table(k).append(r.key, r.logp, r.bow);
  }
  return model;
}

}  // namespace relm
