#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "relm/vocab.hpp"

namespace relm {

struct NormalizePolicy {
  bool lowercase = true;
  bool map_numbers = true;
  bool keep_punctuation = true;
};

inline bool is_punct_token(std::string_view tok) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (std::isalnum(static_cast<unsigned char>(c))) return false;
  return true;
}

// A numeric token carries at least one digit and nothing outside the
// digit/punctuation repertoire, e.g. "25", "3.5", "1,000", "1/2".
inline bool is_numeric_token(std::string_view tok) {
  bool digit = false;
  for (char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c)))
      digit = true;
    else if (c != '.' && c != ',' && c != ':' && c != '-' && c != '/' &&
             c != '%' && c != '+')
      return false;
  }
  return digit;
}

inline bool is_sentence_final_punct(std::string_view tok) {
  return tok == "." || tok == "!" || tok == "?";
}

// String-level pass: folding, number macro substitution, punctuation
// filtering.  Empty result means the caller should skip the line.
inline std::vector<std::string> normalize_tokens(std::string_view raw,
                                                 const NormalizePolicy& policy) {
  std::vector<std::string> out;
  for (auto piece : split_ws(raw)) {
    std::string tok(piece);
    if (policy.lowercase)
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!policy.keep_punctuation && is_punct_token(tok)) continue;
    if (policy.map_numbers && is_numeric_token(tok)) tok = Vocabulary::kNumber;
    out.push_back(std::move(tok));
  }
  return out;
}

// Full normalization into ids with boundary markers applied.  Returns
// nothing for an empty line (empty-sequence signal).
inline std::optional<TokenSequence> normalize(std::string_view raw,
                                              const NormalizePolicy& policy,
                                              Vocabulary& vocab,
                                              bool grow_vocab = true) {
  auto tokens = normalize_tokens(raw, policy);
  if (tokens.empty()) return std::nullopt;
  TokenSequence seq;
  seq.marked = true;
  seq.ids.reserve(tokens.size() + 2);
  seq.ids.push_back(vocab.bos());
  for (const auto& t : tokens)
    seq.ids.push_back(grow_vocab ? vocab.add(t) : vocab.lookup(t));
  seq.ids.push_back(vocab.eos());
  return seq;
}

// Inverse of normalize modulo markers: the surface string of the
// in-vocabulary tokens.
inline std::string render(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  size_t begin = seq.marked ? 1 : 0;
  size_t end = seq.marked ? seq.ids.size() - 1 : seq.ids.size();
  for (size_t i = begin; i < end; ++i) {
    if (!out.empty()) out += ' ';
    out += vocab.token(seq.ids[i]);
  }
  return out;
}

}  // namespace relm
