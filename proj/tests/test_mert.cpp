#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "relm/mert.hpp"

using namespace relm;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> toks(const std::string& text) {
  std::vector<std::string> out;
  for (auto t : split_ws(text)) out.emplace_back(t);
  return out;
}

Hypothesis hyp(const std::string& seg, const std::string& text, double decoder,
               size_t rank) {
  Hypothesis h;
  h.segment_id = seg;
  h.tokens = toks(text);
  h.add_feature(Hypothesis::kDecoderFeature, decoder);
  h.decoder_rank = rank;
  return h;
}

}  // namespace

TEST_CASE("bleu identity and zero cases", "[mert]") {
  // every candidate equals its reference
  std::vector<std::vector<std::string>> refs = {toks("the cat sat on the mat"),
                                                toks("a b c d e")};
  REQUIRE(corpus_bleu(refs, refs).score == 1.0);

  // frozen from tests/oracle/bleu_oracle.py
  auto r1 = corpus_bleu({toks("the cat sat on")}, {toks("the cat sat on the mat")});
  REQUIRE_THAT(r1.score, WithinAbs(0.60653065971263342, 1e-6));
  REQUIRE(r1.stats.matches[0] == 4);
  REQUIRE(r1.stats.matches[3] == 1);

  auto r2 = corpus_bleu({toks("the the the the")}, {toks("the cat")});
  REQUIRE(r2.score == 0.0);
  REQUIRE(r2.stats.matches[0] == 1);  // clipped at the reference count

  REQUIRE_THROWS_AS(corpus_bleu({toks("a")}, {toks("a"), toks("b")}), FormatError);
}

TEST_CASE("bleu additivity over segments", "[mert]") {
  std::vector<std::vector<std::string>> cands = {toks("the cat sat on the mat"),
                                                 toks("a b c d")};
  std::vector<std::vector<std::string>> refs = {toks("the cat sat on the mat"),
                                                toks("a b c e")};
  auto joint = corpus_bleu(cands, refs);
  REQUIRE_THAT(joint.score, WithinAbs(0.83759223970862695, 1e-12));

  BleuStats summed;
  for (size_t i = 0; i < cands.size(); ++i)
    summed += bleu_stats(cands[i], refs[i]);
  REQUIRE(bleu_score(summed) == joint.score);
}

TEST_CASE("bleu bounds", "[mert]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::vector<std::string>> cands, refs;
    for (int seg = 0; seg < 3; ++seg) {
      std::vector<std::string> c, r;
      size_t lc = 4 + rng() % 5, lr = 4 + rng() % 5;
      for (size_t i = 0; i < lc; ++i) c.push_back("w" + std::to_string(rng() % 4));
      for (size_t i = 0; i < lr; ++i) r.push_back("w" + std::to_string(rng() % 4));
      cands.push_back(std::move(c));
      refs.push_back(std::move(r));
    }
    double score = corpus_bleu(cands, refs).score;
    REQUIRE(score >= 0.0);
    REQUIRE(score <= 1.0);
    if (score == 1.0) REQUIRE(cands == refs);
  }
}

TEST_CASE("mert reaches the planted optimum", "[mert]") {
  // one feature marks the reference hypothesis; any positive weight on
  // it yields corpus BLEU 1
  std::mt19937_64 rng(17);
  std::vector<NBestList> lists;
  std::vector<std::vector<std::string>> refs;
  for (int seg = 0; seg < 6; ++seg) {
    NBestList list;
    list.segment_id = std::to_string(seg);
    std::string ref_text = "ref" + std::to_string(seg) + " common words here";
    refs.push_back(toks(ref_text));
    for (int i = 0; i < 12; ++i) {
      bool is_ref = i == 7;
      auto h = hyp(list.segment_id,
                   is_ref ? ref_text : "junk" + std::to_string(rng() % 100) +
                                           " common words here",
                   -0.01 * i, static_cast<size_t>(i));
      h.add_feature("oracle", is_ref ? 1.0 : 0.0);
      list.hyps.push_back(std::move(h));
    }
    lists.push_back(std::move(list));
  }
  WeightVector init;
  init.set(Hypothesis::kDecoderFeature, 1.0);
  init.set("oracle", 0.0);

  MertOptions options;
  options.seed = 11;
  auto result = mert_optimize(lists, refs, init, options);
  REQUIRE(result.best_bleu == 1.0);
  REQUIRE_FALSE(result.degenerate);

  // the returned weights reproduce the optimum through selection
  std::vector<std::vector<std::string>> picks;
  for (const auto& list : lists)
    picks.push_back(list.hyps[loglinear_select(list, result.weights).best].tokens);
  REQUIRE(corpus_bleu(picks, refs).score == 1.0);

  // trace of best BLEU is non-decreasing
  double prev = 0;
  for (const auto& [iter, bleu, edge] : result.trace) {
    REQUIRE(bleu >= prev);
    prev = bleu;
  }

  // never returns weights below the initial objective
  REQUIRE(result.best_bleu >= std::get<1>(result.trace.front()));
}

TEST_CASE("one-dimensional threshold analysis", "[mert]") {
  // two hypotheses, one free weight w on feature f: hyp A has f=2,
  // hyp B has f=-1; decoder weight fixed at 0.  Selection picks A when
  // w > 0, B when w < 0 (tie at 0 goes to A by decoder rank).  B is the
  // reference, so the optimum lives in w < 0.
  NBestList list;
  list.segment_id = "0";
  auto a = hyp("0", "wrong answer", 0.0, 0);
  a.add_feature("f", 2.0);
  auto b = hyp("0", "right answer gold four", 0.0, 1);
  b.add_feature("f", -1.0);
  list.hyps = {a, b};
  std::vector<std::vector<std::string>> refs = {toks("right answer gold four")};

  WeightVector init;
  init.set(Hypothesis::kDecoderFeature, 0.0);
  init.set("f", 0.5);  // starts in the wrong region
  MertOptions options;
  options.seed = 4;
  auto result = mert_optimize({list}, refs, init, options);
  REQUIRE(result.best_bleu == 1.0);
  REQUIRE(*result.weights.get("f") < 0.0);

  // selection confirms the sign analysis
  auto ranking = loglinear_select(list, result.weights);
  REQUIRE(list.hyps[ranking.best].tokens == refs[0]);
}

TEST_CASE("mert is deterministic under a fixed seed", "[mert]") {
  std::mt19937_64 rng(5);
  std::vector<NBestList> lists;
  std::vector<std::vector<std::string>> refs;
  for (int seg = 0; seg < 4; ++seg) {
    NBestList list;
    list.segment_id = std::to_string(seg);
    refs.push_back(toks("r" + std::to_string(seg) + " x y z"));
    for (int i = 0; i < 8; ++i) {
      auto h = hyp(list.segment_id,
                   "c" + std::to_string(rng() % 30) + " x y z",
                   -static_cast<double>(i), static_cast<size_t>(i));
      h.add_feature("lm", -static_cast<double>(rng() % 10));
      list.hyps.push_back(std::move(h));
    }
    lists.push_back(std::move(list));
  }
  WeightVector init;
  init.set(Hypothesis::kDecoderFeature, 1.0);
  init.set("lm", 0.1);
  MertOptions options;
  options.seed = 99;
  auto r1 = mert_optimize(lists, refs, init, options);
  auto r2 = mert_optimize(lists, refs, init, options);
  REQUIRE(r1.best_bleu == r2.best_bleu);
  REQUIRE(r1.weights.weights == r2.weights.weights);
  REQUIRE(r1.trace == r2.trace);
  REQUIRE(r1.evaluations == r2.evaluations);
}

TEST_CASE("identical hypotheses flag a degenerate objective", "[mert]") {
  std::vector<NBestList> lists(2);
  std::vector<std::vector<std::string>> refs;
  for (int seg = 0; seg < 2; ++seg) {
    lists[seg].segment_id = std::to_string(seg);
    for (int i = 0; i < 3; ++i) {
      auto h = hyp(lists[seg].segment_id, "same tokens every time",
                   -static_cast<double>(i), static_cast<size_t>(i));
      h.add_feature("lm", static_cast<double>(i));
      lists[seg].hyps.push_back(std::move(h));
    }
    refs.push_back(toks("some reference text here"));
  }
  WeightVector init;
  init.set(Hypothesis::kDecoderFeature, 1.0);
  init.set("lm", 0.25);
  auto result = mert_optimize(lists, refs, init, {});
  REQUIRE(result.degenerate);
  REQUIRE(result.weights.weights == init.weights);
}
