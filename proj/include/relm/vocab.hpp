#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "relm/util.hpp"

namespace relm {

using WordId = uint32_t;

// Dense id <-> token bijection with the four reserved symbols at the
// front.  Lookups of unseen tokens yield the unknown-word id.
class Vocabulary {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kNumber = "$number";

  Vocabulary() {
    add(kBos);
    add(kEos);
    add(kUnk);
    add(kNumber);
  }

  WordId bos() const { return 0; }
  WordId eos() const { return 1; }
  WordId unk() const { return 2; }
  WordId number() const { return 3; }

  WordId add(std::string_view token) {
    auto it = ids_.find(std::string(token));
    if (it != ids_.end()) return it->second;
    WordId id = static_cast<WordId>(tokens_.size());
    tokens_.emplace_back(token);
    ids_.emplace(tokens_.back(), id);
    return id;
  }

  // Unseen tokens map to <unk>.
  WordId lookup(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? unk() : it->second;
  }

  bool contains(std::string_view token) const {
    return ids_.count(std::string(token)) != 0;
  }

  const std::string& token(WordId id) const { return tokens_.at(id); }
  size_t size() const { return tokens_.size(); }

  void write(const std::string& path) const {
    AtomicFile out(path);
    for (const auto& t : tokens_) {
      out << t << "\n";
    }
    out.commit();
  }

  static Vocabulary read(const std::string& path) {
    Vocabulary v;
    LineReader in(path);
    std::string line;
    size_t n = 0;
    while (in.next(line)) {
      if (n < v.size()) {
        if (line != v.tokens_[n])
          throw FormatError(path + ": reserved symbol mismatch at line " +
                            std::to_string(n + 1));
      } else {
        v.add(line);
      }
      ++n;
    }
    if (n < 4) throw FormatError(path + ": missing reserved symbols");
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, WordId> ids_;
};

// Ordered ids, optionally wrapped in sentence boundary markers.
struct TokenSequence {
  std::vector<WordId> ids;
  bool marked = false;

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  // Number of prediction events: every real token plus sentence-end.
  size_t predicted() const { return marked ? ids.size() - 1 : ids.size(); }
};

}  // namespace relm
