#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "relm/arpa.hpp"
#include "relm/kneser_ney.hpp"
#include "relm/scorer.hpp"
#include "relm/structured_tag.hpp"

namespace relm {

// Joint word/tag class LM: P(w t) factored into a tag predictor
// P(t_i | pair history) and a word predictor P(w_i | pair history, t_i),
// both modified-KN backoff models over composite symbols.
class JointTagModel {
 public:
  JointTagModel(int order, Vocabulary word_vocab, TagInventory inventory,
                BackoffModel tag_model, BackoffModel word_model,
                double beam = 1e-4)
      : order_(order),
        word_vocab_(std::move(word_vocab)),
        inventory_(std::move(inventory)),
        tag_model_(std::move(tag_model)),
        word_model_(std::move(word_model)),
        beam_(beam) {
    tag_sym_in_tag_.reserve(inventory_.size());
    tag_sym_in_word_.reserve(inventory_.size());
    for (TagId t = 0; t < inventory_.size(); ++t) {
      tag_sym_in_tag_.push_back(tag_model_.vocab().lookup(tag_symbol(t)));
      tag_sym_in_word_.push_back(word_model_.vocab().lookup(tag_symbol(t)));
    }
  }

  static std::string pair_symbol(std::string_view word, TagId tag) {
    std::string s(word);
    s += "|||";
    s += std::to_string(tag);
    return s;
  }
  static std::string tag_symbol(TagId tag) { return "tag:" + std::to_string(tag); }

  int order() const { return order_; }
  double beam() const { return beam_; }
  void set_beam(double b) { beam_ = b; }
  const Vocabulary& word_vocab() const { return word_vocab_; }
  const TagInventory& inventory() const { return inventory_; }
  const BackoffModel& tag_model() const { return tag_model_; }
  const BackoffModel& word_model() const { return word_model_; }
  WordId tag_sym_in_tag(TagId t) const { return tag_sym_in_tag_[t]; }
  WordId tag_sym_in_word(TagId t) const { return tag_sym_in_word_[t]; }

  // Joint chain log-probability of a fully tagged sentence (boundary
  // pairs added here).
  double tagged_chain_logprob(const TaggedSentence& sent) const;

  void save(const std::string& prefix) const {
    write_arpa(tag_model_, prefix + ".tag.arpa");
    write_arpa(word_model_, prefix + ".word.arpa");
    inventory_.write(prefix + ".tags");
    AtomicFile meta(prefix + ".meta");
    meta << "order\t" << std::to_string(order_) << "\n";
    meta << "beam\t" << format_double(beam_) << "\n";
    meta.commit();
  }

  static JointTagModel load(const std::string& prefix) {
    TagInventory inv = TagInventory::read(prefix + ".tags");
    BackoffModel tag = read_arpa(prefix + ".tag.arpa");
    BackoffModel word = read_arpa(prefix + ".word.arpa");
    int order = 0;
    double beam = 1e-4;
    LineReader in(prefix + ".meta");
    std::string line;
    while (in.next(line)) {
      auto f = split_ws(line);
      if (f.size() == 2 && f[0] == "order") order = static_cast<int>(parse_double(f[1]));
      if (f.size() == 2 && f[0] == "beam") beam = parse_double(f[1]);
    }
    if (order < 2) throw FormatError(prefix + ".meta: missing order");
    // the plain-word vocabulary is recoverable from the word model rows
    Vocabulary words;
    const ProbTable& uni = word.table(1);
    for (size_t i = 0; i < uni.size(); ++i) {
      const std::string& tok = word.vocab().token(uni.key(i)[0]);
      if (tok.find("|||") == std::string::npos && tok.rfind("tag:", 0) != 0)
        words.add(tok);
    }
    return JointTagModel(order, std::move(words), std::move(inv), std::move(tag),
                         std::move(word), beam);
  }

 private:
  int order_;
  Vocabulary word_vocab_;
  TagInventory inventory_;
  BackoffModel tag_model_;
  BackoffModel word_model_;
  double beam_;
  std::vector<WordId> tag_sym_in_tag_;
  std::vector<WordId> tag_sym_in_word_;
};

// Forward pass over tag-history states: state = last order-1 (word,tag)
// pairs.  States with equal truncated histories merge by summation, so
// with the beam disabled the pass equals exhaustive enumeration.
class TagForward {
 public:
  explicit TagForward(const JointTagModel& model)
      : TagForward(model, model.beam()) {}
  TagForward(const JointTagModel& model, double beam) : m_(model), beam_(beam) {
    State init;
    init.pairs = {{m_.word_vocab().bos(), m_.inventory().bos_tag}};
    states_.push_back({init, 1.0, 1.0, -1, 0});
  }

  // log P(word | words so far); advances the lattice.
  double advance(std::string_view word) {
    double numerator = step(word, true);
    return std::log(numerator);
  }

  // log P(word | words so far) without advancing.
  double lookahead(std::string_view word) const {
    return std::log(const_cast<TagForward*>(this)->step(word, false));
  }

  double total_logprob() const { return total_; }

  // Viterbi path log-probability and per-position tags (boundary steps
  // included in the probability, excluded from the tag list).
  double viterbi_logprob() const {
    double best = -1e300;
    for (const auto& e : states_)
      if (e.best > 0 && std::log(e.best) + viterbi_scale_ > best)
        best = std::log(e.best) + viterbi_scale_;
    return best;
  }

  std::vector<TagId> best_tags() const {
    int idx = -1;
    double best = -1e300;
    for (size_t i = 0; i < states_.size(); ++i) {
      double v = states_[i].best > 0 ? std::log(states_[i].best) : -1e300;
      if (v > best) {
        best = v;
        idx = static_cast<int>(i);
      }
    }
    std::vector<TagId> tags;
    for (int level = static_cast<int>(trellis_.size()) - 1; level >= 0; --level) {
      const Entry& e = level == static_cast<int>(trellis_.size()) - 1
                           ? states_[idx]
                           : trellis_[level + 1][idx];
      tags.push_back(e.tag);
      idx = e.prev;
    }
    std::reverse(tags.begin(), tags.end());
    return tags;
  }

 private:
  struct State {
    std::vector<std::pair<WordId, TagId>> pairs;
    bool operator==(const State&) const = default;
  };
  struct StateHash {
    size_t operator()(const State& s) const {
      uint64_t h = 0xcbf29ce484222325ull;
      for (auto [w, t] : s.pairs) {
        h = (h ^ w) * 0x100000001b3ull;
        h = (h ^ t) * 0x100000001b3ull;
      }
      return h;
    }
  };
  struct Entry {
    State state;
    double sum = 0;   // normalized forward mass
    double best = 0;  // normalized Viterbi mass
    int prev = -1;    // index into the previous level
    TagId tag = 0;    // tag chosen on the incoming arc
  };

  const JointTagModel& m_;
  double beam_ = 0;
  std::vector<Entry> states_;
  std::vector<std::vector<Entry>> trellis_;  // frozen previous levels
  double total_ = 0;          // sum of log conditionals so far
  double viterbi_scale_ = 0;  // log factor taken out of the best scores
  std::unordered_map<uint64_t, std::pair<WordId, WordId>> pair_cache_;

  std::pair<WordId, WordId> pair_ids(WordId word, TagId tag) {
    uint64_t key = (static_cast<uint64_t>(word) << 32) | tag;
    auto it = pair_cache_.find(key);
    if (it != pair_cache_.end()) return it->second;
    std::string sym = JointTagModel::pair_symbol(m_.word_vocab().token(word), tag);
    std::pair<WordId, WordId> ids = {m_.tag_model().vocab().lookup(sym),
                                     m_.word_model().vocab().lookup(sym)};
    pair_cache_.emplace(key, ids);
    return ids;
  }

  double step(std::string_view word, bool commit) {
    WordId word_id = m_.word_vocab().lookup(word);
    WordId word_sym = m_.word_model().vocab().lookup(word);
    size_t tags = m_.inventory().size();
    std::unordered_map<State, size_t, StateHash> index;
    std::vector<Entry> next;
    std::vector<WordId> tag_ctx, word_ctx;
    double numerator = 0;

    for (size_t si = 0; si < states_.size(); ++si) {
      const Entry& e = states_[si];
      tag_ctx.clear();
      word_ctx.clear();
      for (auto [w, t] : e.state.pairs) {
        auto [tid, wid] = pair_ids(w, t);
        tag_ctx.push_back(tid);
        word_ctx.push_back(wid);
      }
      word_ctx.push_back(0);  // slot for the tag symbol
      for (TagId t = 0; t < tags; ++t) {
        double lp = m_.tag_model().logprob(tag_ctx, m_.tag_sym_in_tag(t));
        word_ctx.back() = m_.tag_sym_in_word(t);
        lp += m_.word_model().logprob(word_ctx, word_sym);
        double p = std::exp(lp);
        numerator += e.sum * p;
        if (!commit) continue;

        State ns = e.state;
        ns.pairs.emplace_back(word_id, t);
        if (ns.pairs.size() > static_cast<size_t>(m_.order() - 1))
          ns.pairs.erase(ns.pairs.begin());
        auto [it, fresh] = index.emplace(ns, next.size());
        if (fresh) next.push_back({std::move(ns), 0, 0, -1, 0});
        Entry& ne = next[it->second];
        ne.sum += e.sum * p;
        if (e.best * p > ne.best) {
          ne.best = e.best * p;
          ne.prev = static_cast<int>(si);
          ne.tag = t;
        }
      }
    }
    if (!commit) return numerator;

    // beam: drop states below best-state mass times the threshold, then
    // renormalize the retained mass
    if (beam_ > 0 && next.size() > 1) {
      double best_sum = 0;
      for (const auto& e : next) best_sum = std::max(best_sum, e.sum);
      std::vector<Entry> kept;
      for (auto& e : next)
        if (e.sum >= best_sum * beam_) kept.push_back(std::move(e));
      next = std::move(kept);
    }
    double retained = 0, best_val = 0;
    for (const auto& e : next) {
      retained += e.sum;
      best_val = std::max(best_val, e.best);
    }
    for (auto& e : next) {
      e.sum /= retained;
      e.best /= best_val;
    }
    viterbi_scale_ += std::log(best_val);
    total_ += std::log(numerator);
    trellis_.push_back(std::move(states_));
    states_ = std::move(next);
    return numerator;
  }
};

struct TagLmScore {
  double logprob = 0;
  double viterbi_logprob = 0;
  std::vector<TagId> tags;  // per real token
};

inline double conditional_word_prob(const JointTagModel& model,
                                    std::span<const std::string> prefix,
                                    std::string_view word) {
  TagForward fwd(model);
  for (const auto& w : prefix) fwd.advance(w);
  return fwd.lookahead(word);
}

inline TagLmScore taglm_score_sentence(const JointTagModel& model,
                                       std::span<const std::string> words,
                                       std::optional<double> beam = std::nullopt) {
  TagForward fwd(model, beam.value_or(model.beam()));
  TagLmScore out;
  for (const auto& w : words) out.logprob += fwd.advance(w);
  out.logprob += fwd.advance(model.word_vocab().token(model.word_vocab().eos()));
  out.viterbi_logprob = fwd.viterbi_logprob();
  out.tags = fwd.best_tags();
  out.tags.pop_back();  // drop the sentence-end step
  return out;
}

inline double JointTagModel::tagged_chain_logprob(const TaggedSentence& sent) const {
  std::vector<std::pair<WordId, TagId>> padded;
  padded.emplace_back(word_vocab_.bos(), inventory_.bos_tag);
  padded.insert(padded.end(), sent.items.begin(), sent.items.end());
  padded.emplace_back(word_vocab_.eos(), inventory_.eos_tag);
  double total = 0;
  std::vector<WordId> tag_ctx, word_ctx;
  for (size_t i = 1; i < padded.size(); ++i) {
    tag_ctx.clear();
    word_ctx.clear();
    size_t b = i > static_cast<size_t>(order_ - 1) ? i - (order_ - 1) : 0;
    for (size_t j = b; j < i; ++j) {
      std::string sym =
          pair_symbol(word_vocab_.token(padded[j].first), padded[j].second);
      tag_ctx.push_back(tag_model_.vocab().lookup(sym));
      word_ctx.push_back(word_model_.vocab().lookup(sym));
    }
    total += tag_model_.logprob(tag_ctx, tag_sym_in_tag_[padded[i].second]);
    word_ctx.push_back(tag_sym_in_word_[padded[i].second]);
    total += word_model_.logprob(
        word_ctx, word_model_.vocab().lookup(word_vocab_.token(padded[i].first)));
  }
  return total;
}

// Trains both factor models with modified KN over composite-symbol
// windows.  The boundary pair plays the sentence-start role.
inline JointTagModel train_joint(const TaggedCorpus& corpus, int n,
                                 double beam = 1e-4) {
  if (corpus.sentences.empty()) throw NumericError("empty tagged corpus");
  if (n < 2) throw NumericError("joint model needs order >= 2");

  Vocabulary tag_vocab, word_vocab;
  auto pair_id = [&](Vocabulary& v, WordId w, TagId t) {
    return v.add(JointTagModel::pair_symbol(corpus.vocab.token(w), t));
  };
  NGramCounter tag_counter(n), word_counter(n + 1);
  Count tag_events = 0;

  for (const auto& sent : corpus.sentences) {
    std::vector<std::pair<WordId, TagId>> padded;
    padded.emplace_back(corpus.vocab.bos(), corpus.inventory.bos_tag);
    padded.insert(padded.end(), sent.items.begin(), sent.items.end());
    padded.emplace_back(corpus.vocab.eos(), corpus.inventory.eos_tag);

    std::vector<WordId> window;
    for (size_t i = 1; i < padded.size(); ++i) {
      WordId tag_sym = tag_vocab.add(JointTagModel::tag_symbol(padded[i].second));
      for (size_t m = 1; m <= std::min<size_t>(n, i + 1); ++m) {
        window.clear();
        for (size_t j = i - (m - 1); j < i; ++j)
          window.push_back(pair_id(tag_vocab, padded[j].first, padded[j].second));
        window.push_back(tag_sym);
        tag_counter.add_window(window);
      }
      ++tag_events;

      WordId word_sym = word_vocab.add(corpus.vocab.token(padded[i].first));
      WordId tag_sym_w = word_vocab.add(JointTagModel::tag_symbol(padded[i].second));
      for (size_t m = 1; m <= std::min<size_t>(n + 1, i + 2); ++m) {
        window.clear();
        if (m >= 2) {
          for (size_t j = i - (m - 2); j < i; ++j)
            window.push_back(pair_id(word_vocab, padded[j].first, padded[j].second));
          window.push_back(tag_sym_w);
        }
        window.push_back(word_sym);
        word_counter.add_window(window);
      }
    }
  }

  auto tag_table = tag_counter.finalize();
  tag_table.set_totals(tag_events, corpus.sentences.size());
  auto word_table = word_counter.finalize();
  word_table.set_totals(tag_events, corpus.sentences.size());

  std::string bos_pair = JointTagModel::pair_symbol(
      corpus.vocab.token(corpus.vocab.bos()), corpus.inventory.bos_tag);

  KnOptions tag_opts;
  tag_opts.include_unk_in_support = false;  // tags form a closed set
  tag_opts.bos_symbol = tag_vocab.lookup(bos_pair);
  tag_opts.fallback_to_witten_bell = true;
  BackoffModel tag_model = train_kn(tag_table, tag_vocab, tag_opts);

  KnOptions word_opts;
  word_opts.bos_symbol = word_vocab.lookup(bos_pair);
  word_opts.fallback_to_witten_bell = true;
  BackoffModel word_model = train_kn(word_table, word_vocab, word_opts);

  return JointTagModel(n, corpus.vocab, corpus.inventory, std::move(tag_model),
                       std::move(word_model), beam);
}

class TagLmScorer : public SentenceScorer {
 public:
  explicit TagLmScorer(const JointTagModel* model) : m_(model) {}
  std::vector<double> word_logprobs(std::span<const std::string> words) const override {
    TagForward fwd(*m_);
    std::vector<double> out;
    out.reserve(words.size() + 1);
    for (const auto& w : words) out.push_back(fwd.advance(w));
    out.push_back(fwd.advance(m_->word_vocab().token(m_->word_vocab().eos())));
    return out;
  }
  const Vocabulary* vocabulary() const override { return &m_->word_vocab(); }

 private:
  const JointTagModel* m_;
};

}  // namespace relm
