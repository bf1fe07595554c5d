#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relm/vocab.hpp"

namespace relm {

// Four-tuple tag: lexical category, feature vector, one or more role
// abstractions, and a modifiee-ordering constraint.  Punctuation tags
// carry no features and use the surface form as category.
struct StructuredTag {
  struct RoleTuple {
    std::string role;          // role variable, e.g. governor
    std::string label;         // functionality label, e.g. np
    std::string position;      // relative position flag
    std::string modifiee_cat;  // lexical category of the modifiee
    bool operator==(const RoleTuple&) const = default;
  };

  std::string category;
  std::vector<std::pair<std::string, std::string>> features;
  std::vector<RoleTuple> roles;  // at least one
  std::string dc;                // ordering constraint over modifiees

  bool operator==(const StructuredTag&) const = default;

  bool is_punctuation() const {
    return !category.empty() &&
           !std::isalnum(static_cast<unsigned char>(category[0])) &&
           category[0] != '<' && category[0] != '$';
  }

  // "category|f1=v1,f2=v2|R:L:UC:MC;R:L:UC:MC|DC"
  std::string serialize() const {
    std::string out = category;
    out += '|';
    for (size_t i = 0; i < features.size(); ++i) {
      if (i) out += ',';
      out += features[i].first + "=" + features[i].second;
    }
    out += '|';
    for (size_t i = 0; i < roles.size(); ++i) {
      if (i) out += ';';
      out += roles[i].role + ":" + roles[i].label + ":" + roles[i].position +
             ":" + roles[i].modifiee_cat;
    }
    out += '|';
    out += dc;
    return out;
  }

  static StructuredTag parse(std::string_view text) {
    auto parts = split_on(text, "|");
    if (parts.size() != 4)
      throw FormatError("structured tag needs 4 pipe-delimited fields: " +
                        std::string(text));
    StructuredTag tag;
    tag.category = std::string(parts[0]);
    if (tag.category.empty()) throw FormatError("empty tag category");
    if (!parts[1].empty()) {
      for (auto kv : split_on(parts[1], ",")) {
        size_t eq = kv.find('=');
        if (eq == std::string_view::npos)
          throw FormatError("bad feature pair: " + std::string(kv));
        tag.features.emplace_back(std::string(kv.substr(0, eq)),
                                  std::string(kv.substr(eq + 1)));
      }
    }
    for (auto r : split_on(parts[2], ";")) {
      if (r.empty()) continue;
      auto f = split_on(r, ":");
      if (f.size() != 4) throw FormatError("role tuple needs 4 fields: " + std::string(r));
      tag.roles.push_back({std::string(f[0]), std::string(f[1]),
                           std::string(f[2]), std::string(f[3])});
    }
    if (tag.roles.empty())
      throw FormatError("structured tag needs at least one role tuple");
    if (tag.is_punctuation() && !tag.features.empty())
      throw FormatError("punctuation tags bear no features: " + std::string(text));
    tag.dc = std::string(parts[3]);
    return tag;
  }
};

using TagId = uint32_t;

// Dense id <-> StructuredTag store; structurally equal tags share an id.
class TagInventory {
 public:
  TagId add(const StructuredTag& tag) {
    std::string key = tag.serialize();
    auto it = ids_.find(key);
    if (it != ids_.end()) return it->second;
    TagId id = static_cast<TagId>(tags_.size());
    tags_.push_back(tag);
    ids_.emplace(std::move(key), id);
    return id;
  }

  const StructuredTag& tag(TagId id) const { return tags_.at(id); }
  size_t size() const { return tags_.size(); }

  std::optional<TagId> find(const StructuredTag& tag) const {
    auto it = ids_.find(tag.serialize());
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  // Boundary tags; a degenerate single-tag corpus may reuse its one tag.
  TagId bos_tag = 0;
  TagId eos_tag = 0;

  void write(const std::string& path) const {
    AtomicFile out(path);
    out << "#bos " << std::to_string(bos_tag) << "\n";
    out << "#eos " << std::to_string(eos_tag) << "\n";
    for (size_t i = 0; i < tags_.size(); ++i)
      out << std::to_string(i) << "\t" << tags_[i].serialize() << "\n";
    out.commit();
  }

  static TagInventory read(const std::string& path) {
    TagInventory inv;
    LineReader in(path);
    std::string line;
    std::optional<TagId> bos, eos;
    while (in.next(line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        uint64_t v = 0;
        auto f = split_ws(line);
        if (f.size() == 2 && parse_u64(f[1], v)) {
          if (f[0] == "#bos") bos = static_cast<TagId>(v);
          if (f[0] == "#eos") eos = static_cast<TagId>(v);
        }
        continue;
      }
      auto f = split_on(line, "\t");
      if (f.size() != 2) throw FormatError(path + ": bad inventory row: " + line);
      uint64_t id = 0;
      if (!parse_u64(f[0], id) || id != inv.tags_.size())
        throw FormatError(path + ": inventory ids must be dense from 0");
      inv.add(StructuredTag::parse(f[1]));
    }
    if (inv.tags_.empty()) throw FormatError(path + ": empty tag inventory");
    inv.bos_tag = bos.value_or(0);
    inv.eos_tag = eos.value_or(0);
    if (inv.bos_tag >= inv.size() || inv.eos_tag >= inv.size())
      throw FormatError(path + ": boundary tag id out of range");
    return inv;
  }

 private:
  std::vector<StructuredTag> tags_;
  std::unordered_map<std::string, TagId> ids_;
};

struct TaggedSentence {
  std::vector<std::pair<WordId, TagId>> items;
};

// Corpus format: one sentence per line, tokens "word|||tag-id", with a
// sidecar inventory file.
struct TaggedCorpus {
  std::vector<TaggedSentence> sentences;
  Vocabulary vocab;
  TagInventory inventory;

  static TaggedCorpus read(const std::string& corpus_path,
                           const std::string& inventory_path) {
    TaggedCorpus out;
    out.inventory = TagInventory::read(inventory_path);
    LineReader in(corpus_path);
    std::string line;
    size_t lineno = 0;
    while (in.next(line)) {
      ++lineno;
      if (strip(line).empty()) continue;
      TaggedSentence sent;
      for (auto tok : split_ws(line)) {
        size_t sep = tok.rfind("|||");
        if (sep == std::string_view::npos)
          throw FormatError(corpus_path + ":" + std::to_string(lineno) +
                            ": token without |||tag-id: " + std::string(tok));
        uint64_t tag = 0;
        if (!parse_u64(tok.substr(sep + 3), tag) || tag >= out.inventory.size())
          throw FormatError(corpus_path + ":" + std::to_string(lineno) +
                            ": bad tag id in " + std::string(tok));
        sent.items.emplace_back(out.vocab.add(tok.substr(0, sep)),
                                static_cast<TagId>(tag));
      }
      out.sentences.push_back(std::move(sent));
    }
    return out;
  }
};

}  // namespace relm
