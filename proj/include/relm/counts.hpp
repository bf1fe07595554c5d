#pragma once

#include <algorithm>
#include <cassert>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "relm/vocab.hpp"

namespace relm {

using Count = uint64_t;

// Requested-key log for the query-locality checks: every tuple a model
// asks the table for is recorded here when attached.
struct AccessLog {
  std::vector<std::vector<WordId>> requests;
  void record(std::span<const WordId> key) {
    requests.emplace_back(key.begin(), key.end());
  }
};

// Sorted flat storage of one n-gram order: keys are concatenated id
// tuples, counts run parallel.
class OrderTable {
 public:
  explicit OrderTable(int order) : order_(order) {}

  int order() const { return order_; }
  size_t size() const { return counts_.size(); }
  std::span<const WordId> key(size_t i) const {
    return {keys_.data() + i * order_, static_cast<size_t>(order_)};
  }
  Count count(size_t i) const { return counts_[i]; }
  Count& count(size_t i) { return counts_[i]; }

  // Index of the tuple or npos.
  static constexpr size_t npos = static_cast<size_t>(-1);
  size_t find(std::span<const WordId> t) const {
    assert(static_cast<int>(t.size()) == order_);
    size_t lo = 0, hi = size();
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      int c = compare(key(mid), t);
      if (c < 0)
        lo = mid + 1;
      else if (c > 0)
        hi = mid;
      else
        return mid;
    }
    return npos;
  }

  // First index whose key has the given prefix; scan forward while the
  // prefix still matches.
  size_t lower_bound_prefix(std::span<const WordId> prefix) const {
    size_t lo = 0, hi = size();
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      auto k = key(mid);
      int c = compare(k.subspan(0, std::min(k.size(), prefix.size())), prefix);
      if (c < 0)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }

  bool has_prefix(size_t i, std::span<const WordId> prefix) const {
    if (i >= size()) return false;
    auto k = key(i);
    return compare(k.subspan(0, prefix.size()), prefix) == 0;
  }

  void append(std::span<const WordId> t, Count c) {
    keys_.insert(keys_.end(), t.begin(), t.end());
    counts_.push_back(c);
  }

  // Sort raw appended tuples and fold duplicates by summation.
  void finalize() {
    size_t n = counts_.size();
    std::vector<uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [this](uint32_t a, uint32_t b) {
      return compare(key(a), key(b)) < 0;
    });
    std::vector<WordId> keys;
    keys.reserve(keys_.size());
    std::vector<Count> counts;
    counts.reserve(n);
    for (size_t idx = 0; idx < n; ++idx) {
      auto k = key(perm[idx]);
      if (!counts.empty() &&
          std::equal(k.begin(), k.end(), keys.end() - order_)) {
        counts.back() += counts_[perm[idx]];
      } else {
        keys.insert(keys.end(), k.begin(), k.end());
        counts.push_back(counts_[perm[idx]]);
      }
    }
    keys_ = std::move(keys);
    counts_ = std::move(counts);
  }

  static int compare(std::span<const WordId> a, std::span<const WordId> b) {
    size_t n = std::min(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
      if (a[i] < b[i]) return -1;
      if (a[i] > b[i]) return 1;
    }
    return a.size() < b.size() ? -1 : a.size() > b.size() ? 1 : 0;
  }

 private:
  int order_;
  std::vector<WordId> keys_;
  std::vector<Count> counts_;
};

// Counts for all orders 1..n.  Finalized tables are immutable and safe
// for concurrent readers.
class NGramCountTable {
 public:
  explicit NGramCountTable(int max_order) {
    for (int k = 1; k <= max_order; ++k) orders_.emplace_back(k);
  }

  int max_order() const { return static_cast<int>(orders_.size()); }
  const OrderTable& order(int k) const { return orders_[k - 1]; }
  OrderTable& order(int k) { return orders_[k - 1]; }

  Count total_tokens() const { return total_tokens_; }
  Count sentence_count() const { return sentence_count_; }
  bool external() const { return external_; }
  void mark_external() { external_ = true; }

  void attach_log(AccessLog* log) const { log_ = log; }

  Count lookup(std::span<const WordId> t) const {
    if (t.empty() || static_cast<int>(t.size()) > max_order()) return 0;
    if (log_) log_->record(t);
    const OrderTable& ot = order(static_cast<int>(t.size()));
    size_t i = ot.find(t);
    return i == OrderTable::npos ? 0 : ot.count(i);
  }

  void set_totals(Count tokens, Count sentences) {
    total_tokens_ = tokens;
    sentence_count_ = sentences;
  }

 private:
  std::vector<OrderTable> orders_;
  Count total_tokens_ = 0;
  Count sentence_count_ = 0;
  bool external_ = false;
  mutable AccessLog* log_ = nullptr;
};

// Streaming counter.  Windows slide over the boundary-marked sequence;
// the window ending at <s> is not an event (sentence-start is never
// predicted, sentence-end always is).
class NGramCounter {
 public:
  explicit NGramCounter(int max_order) : table_(max_order) {}

  void add_sentence(const TokenSequence& seq) {
    assert(seq.marked);
    const auto& ids = seq.ids;
    int n = table_.max_order();
    for (size_t i = 1; i < ids.size(); ++i) {
      for (int k = 1; k <= n; ++k) {
        if (static_cast<size_t>(k) > i + 1) break;
        table_.order(k).append({&ids[i + 1 - k], static_cast<size_t>(k)}, 1);
      }
    }
    tokens_ += ids.size() - 1;
    ++sentences_;
  }

  // Direct window entry for callers that build tables over composite
  // symbol tuples rather than sentences.
  void add_window(std::span<const WordId> window, Count c = 1) {
    table_.order(static_cast<int>(window.size())).append(window, c);
  }
  void add_tokens(Count n) { tokens_ += n; }

  NGramCountTable finalize() {
    for (int k = 1; k <= table_.max_order(); ++k) table_.order(k).finalize();
    table_.set_totals(tokens_, sentences_);
    return std::move(table_);
  }

 private:
  NGramCountTable table_;
  Count tokens_ = 0;
  Count sentences_ = 0;
};

inline NGramCountTable count_corpus(const std::vector<TokenSequence>& corpus,
                                    int n) {
  NGramCounter counter(n);
  for (const auto& s : corpus) counter.add_sentence(s);
  return counter.finalize();
}

// Deterministic merge by count additivity.
inline NGramCountTable merge_counts(const std::vector<const NGramCountTable*>& parts) {
  assert(!parts.empty());
  int n = parts.front()->max_order();
  NGramCounter merged(n);
  Count tokens = 0, sentences = 0;
  bool external = false;
  for (const NGramCountTable* p : parts) {
    if (p->max_order() != n) throw FormatError("merge: order mismatch");
    for (int k = 1; k <= n; ++k) {
      const OrderTable& ot = p->order(k);
      for (size_t i = 0; i < ot.size(); ++i) merged.add_window(ot.key(i), ot.count(i));
    }
    tokens += p->total_tokens();
    sentences += p->sentence_count();
    external |= p->external();
  }
  NGramCountTable out = merged.finalize();
  out.set_totals(tokens, sentences);
  if (external) out.mark_external();
  return out;
}

// Open-vocabulary transform: words whose unigram event count is at or
// below the threshold are rewritten to <unk> at every order.
inline NGramCountTable apply_unk_threshold(const NGramCountTable& table,
                                           const Vocabulary& vocab,
                                           Count threshold) {
  if (threshold == 0) throw FormatError("unk threshold must be >= 1");
  std::vector<bool> rare(vocab.size(), false);
  const OrderTable& uni = table.order(1);
  for (size_t i = 0; i < uni.size(); ++i) {
    WordId w = uni.key(i)[0];
    if (uni.count(i) <= threshold && w != vocab.bos() && w != vocab.eos())
      rare[w] = true;
  }
  NGramCounter counter(table.max_order());
  std::vector<WordId> tmp;
  for (int k = 1; k <= table.max_order(); ++k) {
    const OrderTable& ot = table.order(k);
    for (size_t i = 0; i < ot.size(); ++i) {
      auto key = ot.key(i);
      tmp.assign(key.begin(), key.end());
      for (WordId& w : tmp)
        if (w < rare.size() && rare[w]) w = vocab.unk();
      counter.add_window(tmp, ot.count(i));
    }
  }
  NGramCountTable out = counter.finalize();
  out.set_totals(table.total_tokens(), table.sentence_count());
  return out;
}

// --- count files: "tok tok tok<TAB>count", sorted bytewise, one order
// --- per file, .gz handled by extension.

struct CountFileReport {
  size_t accepted = 0;
  std::vector<std::pair<size_t, std::string>> rejected;  // line number, reason
};

inline NGramCountTable read_count_file(const std::string& path, int expected_order,
                                       Vocabulary& vocab,
                                       double max_reject_ratio = 0.01,
                                       CountFileReport* report = nullptr) {
  LineReader in(path);
  NGramCounter counter(expected_order);
  CountFileReport local;
  CountFileReport& rep = report ? *report : local;
  std::string line;
  size_t lineno = 0;
  std::vector<WordId> ids;
  Count tokens = 0;
  while (in.next(line)) {
    ++lineno;
    if (line.empty()) continue;
    size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      rep.rejected.emplace_back(lineno, "missing TAB");
      continue;
    }
    uint64_t count = 0;
    if (!parse_u64(std::string_view(line).substr(tab + 1), count) || count == 0) {
      rep.rejected.emplace_back(lineno, "count not a positive integer");
      continue;
    }
    auto toks = split_ws(std::string_view(line).substr(0, tab));
    if (static_cast<int>(toks.size()) != expected_order) {
      rep.rejected.emplace_back(lineno, "arity " + std::to_string(toks.size()) +
                                            " != " + std::to_string(expected_order));
      continue;
    }
    ids.clear();
    for (auto t : toks) ids.push_back(vocab.add(t));
    counter.add_window(ids, count);
    ++rep.accepted;
    if (expected_order == 1) tokens += count;
  }
  size_t total = rep.accepted + rep.rejected.size();
  if (total > 0 &&
      static_cast<double>(rep.rejected.size()) > max_reject_ratio * total)
    throw FormatError(path + ": " + std::to_string(rep.rejected.size()) + " of " +
                      std::to_string(total) + " lines rejected");
  NGramCountTable out = counter.finalize();
  out.set_totals(tokens, 0);
  out.mark_external();
  return out;
}

inline void write_count_file(const NGramCountTable& table, int order,
                             const Vocabulary& vocab, const std::string& path) {
  const OrderTable& ot = table.order(order);
  std::vector<std::string> lines;
  lines.reserve(ot.size());
  for (size_t i = 0; i < ot.size(); ++i) {
    std::string line;
    for (WordId w : ot.key(i)) {
      if (!line.empty()) line += ' ';
      line += vocab.token(w);
    }
    line += '\t';
    line += std::to_string(ot.count(i));
    lines.push_back(std::move(line));
  }
  // bytewise order on the token field == bytewise order on the full
  // line up to the TAB, which sorts before space-extended keys
  std::sort(lines.begin(), lines.end(), [](const std::string& a, const std::string& b) {
    std::string_view ka(a.data(), a.rfind('\t'));
    std::string_view kb(b.data(), b.rfind('\t'));
    return ka < kb;
  });
  AtomicFile out(path);
  for (const auto& l : lines) {
    out << l << "\n";
  }
  out.commit();
}

}  // namespace relm
