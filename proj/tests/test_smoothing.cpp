#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "relm/arpa.hpp"
#include "relm/count_of_counts.hpp"
#include "relm/kneser_ney.hpp"
#include "relm/scorer.hpp"
#include "relm/text.hpp"

using namespace relm;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

std::vector<TokenSequence> encode_corpus(const std::vector<std::string>& lines,
                                         Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  for (const auto& l : lines) {
    auto seq = normalize(l, {}, vocab);
    if (seq) out.push_back(*seq);
  }
  return out;
}

double query(const BackoffModel& m, std::vector<std::string> ctx,
             const std::string& w) {
  std::vector<WordId> ids;
  for (auto& t : ctx) ids.push_back(m.vocab().lookup(t));
  return m.logprob(ids, m.vocab().lookup(w));
}

// Sum of P(w|h) over the model support for every stored context.
double worst_context_sum_error(const BackoffModel& m) {
  auto support = m.support();
  double worst = 0;
  // empty context plus every row that carries a backoff weight
  std::vector<std::vector<WordId>> contexts = {{}};
  for (int k = 1; k < m.order(); ++k) {
    const ProbTable& pt = m.table(k);
    for (size_t i = 0; i < pt.size(); ++i)
      if (pt.has_bow(i))
        contexts.emplace_back(pt.key(i).begin(), pt.key(i).end());
  }
  for (const auto& ctx : contexts) {
    double sum = 0;
    for (WordId w : support) sum += std::exp(m.logprob(ctx, w));
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

CountOfCounts law_generated(double alpha, double f1, Count max_c) {
  CountOfCounts coc;
  coc.order = 4;
  double f = f1;
  coc.entries[1] = {f, false, 0};
  for (Count c = 2; c <= max_c; ++c) {
    f *= std::exp(-alpha / static_cast<double>(c - 1));
    coc.entries[c] = {f, false, 0};
  }
  return coc;
}

}  // namespace

TEST_CASE("alpha recovered from law-generated counts-of-counts", "[smoothing]") {
  auto coc = law_generated(1.5, 1e6, 12);
  auto fit = estimate_alpha(coc, 2, 10);
  REQUIRE_THAT(fit.alpha, WithinAbs(1.5, 1e-9));
  REQUIRE(fit.residual_norm < 1e-9);
}

TEST_CASE("constant counts-of-counts are ill-conditioned", "[smoothing]") {
  CountOfCounts coc;
  coc.order = 2;
  for (Count c = 1; c <= 12; ++c) coc.entries[c] = {100.0, false, 0};
  REQUIRE_THROWS_AS(estimate_alpha(coc, 2, 10), IllConditionedFit);
  try {
    estimate_alpha(coc, 2, 10);
  } catch (const IllConditionedFit& e) {
    REQUIRE(e.offending_c == 2);
  }
}

TEST_CASE("extrapolation fills F(1) by the law", "[smoothing]") {
  CountOfCounts coc;
  coc.order = 4;
  coc.entries[2] = {100.0, false, 0};
  auto res = extrapolate_count_of_counts(coc, std::log(2.0), 1);
  REQUIRE(res.extended);
  REQUIRE(res.coc.frequency(1) == 200.0);
  REQUIRE(res.coc.entries.at(1).extrapolated);

  // reference magnitude from the paper's 4-gram alpha
  CountOfCounts big;
  big.order = 4;
  big.entries[2] = {1e6, false, 0};
  auto res2 = extrapolate_count_of_counts(big, 2.42, 1);
  REQUIRE(res2.coc.frequency(1) == 11245859.0);
}

TEST_CASE("extrapolation below observed is a warning no-op", "[smoothing]") {
  CountOfCounts coc;
  coc.order = 3;
  coc.entries[1] = {10.0, false, 0};
  coc.entries[2] = {5.0, false, 0};
  auto res = extrapolate_count_of_counts(coc, 1.0, 1);
  REQUIRE_FALSE(res.extended);
}

TEST_CASE("extrapolate then re-estimate returns the same alpha", "[smoothing]") {
  auto coc = law_generated(2.0, 5e7, 12);
  CountOfCounts upper;
  upper.order = coc.order;
  for (Count c = 5; c <= 12; ++c) upper.entries[c] = coc.entries[c];
  auto res = extrapolate_count_of_counts(upper, 2.0, 1);
  REQUIRE(res.extended);
  auto fit = estimate_alpha(res.coc, 1, 8);
  REQUIRE_THAT(fit.alpha, WithinAbs(2.0, 1e-4));  // integer rounding noise
}

TEST_CASE("count-of-counts file round-trip", "[smoothing]") {
  auto dir = fs::temp_directory_path() / ("relm_coc_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto coc = law_generated(1.7, 1234.0, 6);
  coc.entries[1].extrapolated = true;
  coc.entries[1].alpha = 1.7;
  auto path = (dir / "coc.tsv").string();
  write_count_of_counts(coc, path);
  auto back = read_count_of_counts(path);
  REQUIRE(back.order == coc.order);
  REQUIRE(back.entries.size() == coc.entries.size());
  for (const auto& [c, e] : coc.entries) {
    REQUIRE(back.frequency(c) == e.frequency);
    REQUIRE(back.entries.at(c).extrapolated == e.extrapolated);
  }
  fs::remove_all(dir);
}

TEST_CASE("modified KN matches the brute-force oracle", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a b", "a b", "a c"}, vocab);
  auto table = count_corpus(corpus, 2);
  auto model = train_kn(table, vocab);

  // frozen values from tests/oracle/kn_oracle.py
  REQUIRE_THAT(std::exp(query(model, {"a"}, "b")),
               WithinAbs(0.30844444444444441, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {"a"}, "c")), WithinAbs(0.364, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {"<s>"}, "a")), WithinAbs(0.232, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {"b"}, "</s>")), WithinAbs(0.364, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {"c"}, "</s>")),
               WithinAbs(0.71733333333333327, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {}, "a")), WithinAbs(0.232, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {}, "</s>")), WithinAbs(0.152, 1e-10));
  REQUIRE_THAT(std::exp(query(model, {}, "<unk>")), WithinAbs(0.152, 1e-10));

  // discounts as the oracle derives them
  REQUIRE_THAT(model.discounts[2].d1, WithinAbs(1.0 / 3.0, 1e-12));
  REQUIRE_THAT(model.discounts[2].d2, WithinAbs(1.5, 1e-12));
  REQUIRE_THAT(model.discounts[2].d3plus, WithinAbs(3.0, 1e-12));
  REQUIRE_THAT(model.discounts[1].d1, WithinAbs(0.6, 1e-12));
}

TEST_CASE("backoff chain for words unseen in context", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a b", "a b", "a c"}, vocab);
  auto model = train_kn(count_corpus(corpus, 2), vocab);

  // bow(b) * p1(<unk>) = 0.75 * 0.152, from the oracle trace
  REQUIRE_THAT(std::exp(query(model, {"b"}, "never-seen")),
               WithinAbs(0.114, 1e-10));
  // top-order hit returns the stored probability exactly
  std::vector<WordId> key = {vocab.lookup("a"), vocab.lookup("b")};
  size_t idx = model.table(2).find(key);
  REQUIRE(idx != ProbTable::npos);
  REQUIRE(query(model, {"a"}, "b") == model.table(2).logp(idx));
}

TEST_CASE("per-context sums are 1 on the fixture model", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a b", "a b", "a c"}, vocab);
  auto model = train_kn(count_corpus(corpus, 2), vocab);
  REQUIRE(worst_context_sum_error(model) < 1e-6);
}

TEST_CASE("smallest model normalizes", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a"}, vocab);
  auto model = train_kn(count_corpus(corpus, 1), vocab);
  double sum = std::exp(query(model, {}, "a")) +
               std::exp(query(model, {}, "</s>")) +
               std::exp(query(model, {}, "<unk>"));
  REQUIRE_THAT(sum, WithinAbs(1.0, 1e-6));
}

TEST_CASE("missing singletons make discounts undefined", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a a", "a a"}, vocab);  // every count >= 2
  auto table = count_corpus(corpus, 1);
  try {
    train_kn(table, vocab);
    FAIL("expected DiscountError");
  } catch (const DiscountError& e) {
    REQUIRE(e.order == 1);
  }
}

TEST_CASE("KN from cutoff counts with extrapolated F(1)", "[smoothing]") {
  std::mt19937_64 rng(5);
  std::vector<std::string> words;
  std::vector<double> zipf;
  for (int i = 0; i < 1200; ++i) {
    words.push_back("w" + std::to_string(i));
    zipf.push_back(1.0 / (i + 1));
  }
  std::discrete_distribution<int> pick(zipf.begin(), zipf.end());
  std::vector<std::string> lines;
  for (int i = 0; i < 6000; ++i) {
    std::string line;
    size_t len = 3 + rng() % 7;
    for (size_t j = 0; j < len; ++j) {
      if (j) line += ' ';
      line += words[pick(rng)];
    }
    lines.push_back(line);
  }
  Vocabulary vocab;
  auto full = count_corpus(encode_corpus(lines, vocab), 3);

  // cut singleton bigrams/trigrams, as a web release would
  NGramCounter cut(3);
  for (int k = 1; k <= 3; ++k) {
    const OrderTable& ot = full.order(k);
    for (size_t i = 0; i < ot.size(); ++i)
      if (k == 1 || ot.count(i) >= 2) cut.add_window(ot.key(i), ot.count(i));
  }
  auto cut_table = cut.finalize();
  cut_table.set_totals(full.total_tokens(), 0);
  cut_table.mark_external();

  KnOptions options;
  for (int k = 2; k <= 3; ++k) {
    auto coc = CountOfCounts::from_table(cut_table, k);
    REQUIRE(coc.frequency(1) == 0);
    auto fit = estimate_alpha(coc, 2, 3);
    auto filled = extrapolate_count_of_counts(coc, fit.alpha, 1);
    REQUIRE(filled.extended);
    options.coc_override[k] = filled.coc;
  }
  auto model = train_kn(cut_table, vocab, options);
  REQUIRE(model.mode == "kn-from-counts");
  REQUIRE(worst_context_sum_error(model) < 1e-6);
}

TEST_CASE("ARPA write/read round-trip is exact", "[smoothing]") {
  auto dir = fs::temp_directory_path() / ("relm_arpa_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Vocabulary vocab;
  auto corpus = encode_corpus(
      {"a b", "a b", "a c", "b c a", "x y z", "c x b y"}, vocab);
  auto model = train_kn(count_corpus(corpus, 3), vocab);

  auto p1 = (dir / "m.arpa").string();
  auto p2 = (dir / "m2.arpa").string();
  write_arpa(model, p1);
  auto back = read_arpa(p1);
  write_arpa(back, p2);

  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  REQUIRE(s1.str() == s2.str());

  // log10 values agree to the serialized precision
  for (int k = 1; k <= 3; ++k) {
    REQUIRE(back.table(k).size() == model.table(k).size());
    for (size_t i = 0; i < model.table(k).size(); ++i) {
      std::vector<std::string> toks;
      for (WordId w : model.table(k).key(i)) toks.push_back(model.vocab().token(w));
      std::vector<WordId> ids;
      for (auto& t : toks) ids.push_back(back.vocab().lookup(t));
      size_t j = back.table(k).find(ids);
      REQUIRE(j != ProbTable::npos);
      REQUIRE_THAT(back.table(k).logp(j) / kLn10,
                   WithinAbs(model.table(k).logp(i) / kLn10, 5.1e-7));
      REQUIRE(back.table(k).has_bow(j) == model.table(k).has_bow(i));
      if (model.table(k).has_bow(i))
        REQUIRE_THAT(back.table(k).bow(j) / kLn10,
                     WithinAbs(model.table(k).bow(i) / kLn10, 5.1e-7));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("uniform scorer gives perplexity |V|", "[smoothing]") {
  struct Uniform : SentenceScorer {
    std::vector<double> word_logprobs(std::span<const std::string> words) const override {
      return std::vector<double>(words.size() + 1, -std::log(17.0));
    }
  } scorer;
  auto rep = perplexity(scorer, {{"x", "y"}, {"z"}});
  REQUIRE_THAT(rep.perplexity, WithinAbs(17.0, 1e-9));
  REQUIRE(rep.predicted == 5);
}

TEST_CASE("hand-traced perplexity on the fixture model", "[smoothing]") {
  Vocabulary vocab;
  auto corpus = encode_corpus({"a b", "a b", "a c"}, vocab);
  auto model = train_kn(count_corpus(corpus, 2), vocab);
  BackoffScorer scorer(&model);
  auto rep = perplexity(scorer, {{"a", "b"}, {"b", "c", "a"}});
  // frozen from tests/oracle/kn_oracle.py
  REQUIRE(rep.predicted == 7);
  REQUIRE_THAT(rep.logprob, WithinAbs(-11.793532179653912, 1e-9));
  REQUIRE_THAT(rep.perplexity, WithinAbs(5.3913203152933038, 1e-9));
}

TEST_CASE("MLE beats KN on training data", "[smoothing]") {
  Vocabulary vocab;
  std::vector<std::string> lines = {"a b a c", "b a b d", "a b c e",
                                    "c d a b"};
  auto corpus = encode_corpus(lines, vocab);
  auto table = count_corpus(corpus, 1);
  auto model = train_kn(table, vocab);

  struct Mle : SentenceScorer {
    const NGramCountTable* t;
    const Vocabulary* v;
    std::vector<double> word_logprobs(std::span<const std::string> words) const override {
      std::vector<double> out;
      for (size_t i = 0; i <= words.size(); ++i) {
        WordId w = i < words.size() ? v->lookup(words[i]) : v->eos();
        out.push_back(std::log(static_cast<double>(t->lookup({&w, 1})) /
                               static_cast<double>(t->total_tokens())));
      }
      return out;
    }
  } mle;
  mle.t = &table;
  mle.v = &vocab;

  std::vector<std::vector<std::string>> text = {{"a", "b", "a", "c"},
                                                {"b", "a", "b", "d"},
                                                {"a", "b", "c", "e"},
                                                {"c", "d", "a", "b"}};
  BackoffScorer kn(&model);
  REQUIRE(perplexity(mle, text).perplexity <=
          perplexity(kn, text).perplexity + 1e-12);
}

TEST_CASE("bigram KN beats unigram KN on held-out data", "[smoothing]") {
  std::mt19937_64 rng(123);
  std::vector<std::string> topics[2] = {{"sun", "moon", "star"},
                                        {"code", "bug", "test"}};
  auto gen = [&](int n) {
    std::vector<std::string> lines;
    for (int i = 0; i < n; ++i) {
      int topic = static_cast<int>(rng() % 2);
      std::string line;
      size_t len = 3 + rng() % 4;
      for (size_t j = 0; j < len; ++j) {
        if (j) line += ' ';
        line += topics[topic][rng() % 3];
      }
      lines.push_back(line);
    }
    return lines;
  };
  Vocabulary vocab;
  auto lines = gen(300);
  lines.push_back("comet nebula quasar");  // keeps F(1) defined at all orders
  auto train = encode_corpus(lines, vocab);
  auto uni = train_kn(count_corpus(train, 1), vocab);
  auto bi = train_kn(count_corpus(train, 2), vocab);

  std::vector<std::vector<std::string>> heldout;
  for (const auto& line : gen(60)) {
    std::vector<std::string> sent;
    for (auto piece : split_ws(line)) sent.emplace_back(piece);
    heldout.push_back(sent);
  }
  BackoffScorer s1(&uni), s2(&bi);
  REQUIRE(perplexity(s2, heldout).perplexity <=
          perplexity(s1, heldout).perplexity);
}

TEST_CASE("random small models normalize everywhere", "[smoothing]") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 4; ++trial) {
    size_t vsize = 3 + rng() % 40;
    int order = 1 + static_cast<int>(rng() % 3);
    std::vector<std::string> words;
    for (size_t i = 0; i < vsize; ++i) words.push_back("w" + std::to_string(i));
    std::vector<std::string> lines;
    for (int i = 0; i < 120; ++i) {
      std::string line;
      size_t len = 1 + rng() % 9;
      for (size_t j = 0; j < len; ++j) {
        if (j) line += ' ';
        line += words[rng() % vsize];
      }
      lines.push_back(line);
    }
    lines.push_back("rare" + std::to_string(trial) + "a rare" +
                    std::to_string(trial) + "b rare" + std::to_string(trial) +
                    "c");  // singleton mass so discounts stay defined
    Vocabulary vocab;
    auto corpus = encode_corpus(lines, vocab);
    auto model = train_kn(count_corpus(corpus, order), vocab);
    INFO("trial " << trial << " vocab " << vsize << " order " << order);
    REQUIRE(worst_context_sum_error(model) < 1e-6);
  }
}
