#include <gtest/gtest.h>

#include <json.hpp>

#include "oracles.hpp"
#include "userprof/error.hpp"
#include "userprof/evaluation.hpp"
#include "userprof/random.hpp"

using namespace userprof;
using L = StanceLabel;

namespace {

std::vector<EvalResult> results_of(const std::vector<L>& pred, const std::vector<L>& gold, const std::string& m = "m") {
  std::vector<EvalResult> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.push_back({"u" + std::to_string(i / 15), "S" + std::to_string(i % 15), m, pred[i], gold[i]});
  }
  return out;
}

std::vector<int> ints(const std::vector<L>& v) {
  std::vector<int> out;
  for (auto l : v) out.push_back(static_cast<int>(l));
  return out;
}

std::vector<L> random_labels(Rng& rng, std::size_t n) {
  std::vector<L> out(n);
  for (auto& l : out) l = static_cast<L>(rng.uniform_index(3));
  return out;
}

}  // namespace

TEST(ParseLabel, Canonical) {
  EXPECT_EQ(parse_label("True").label, L::True);
  EXPECT_EQ(parse_label("TRUE.").label, L::True);
  EXPECT_EQ(parse_label("false").label, L::False);
  EXPECT_EQ(parse_label("cannot be answered").label, L::CannotAnswer);
  EXPECT_FALSE(parse_label("Cannot be answered").warning);
}

TEST(ParseLabel, FallbackWarns) {
  auto p = parse_label("maybe");
  EXPECT_EQ(p.label, L::CannotAnswer);
  EXPECT_TRUE(p.warning);
  EXPECT_TRUE(parse_label("untrue statement").warning);
}

TEST(DetectStance, MockLabels) {
  StanceStatement s{"S1", "The user likes trams.", StatementSource::curated};
  MockGateway yes(std::vector<MockRule>{{"(?s).*", "True"}});
  EXPECT_EQ(detect_stance("[T1] I love trams", s, default_template("evaluate"), yes).label, L::True);
  MockGateway chatty(std::vector<MockRule>{{"(?s).*", "I am not sure what to say"}});
  auto d = detect_stance("[T1] x", s, default_template("evaluate"), chatty);
  EXPECT_EQ(d.label, L::CannotAnswer);
  EXPECT_TRUE(d.parse_warning);
  MockGateway broken(std::vector<MockRule>{{"^never$", ""}});
  auto f = detect_stance("[T1] x", s, default_template("evaluate"), broken);
  EXPECT_TRUE(f.transport_failure);
  EXPECT_THROW(detect_stance("", s, default_template("evaluate"), yes), InvalidArgument);
}

TEST(DetectStance, PlantedAgreementFollowsScriptedJudge) {
  StanceStatement s{"S4", "The user supports a fare freeze.", StatementSource::curated};
  MockGateway judge(std::vector<MockRule>{{"(?s)Claim ID: S4\n.*endorse-s4", "True"}, {"Claim ID:", "Cannot be answered"}});
  auto tpl = default_template("evaluate");
  EXPECT_EQ(detect_stance("[T9] transit fare endorse-s4", s, tpl, judge).label, L::True);
  EXPECT_EQ(detect_stance("[T9] unrelated", s, tpl, judge).label, L::CannotAnswer);
}

TEST(MacroF1, PerfectAndWorkedExample) {
  std::vector<L> gold = {L::True, L::False, L::CannotAnswer};
  EXPECT_DOUBLE_EQ(macro_f1(gold, gold), 1.0);
  std::vector<L> pred = {L::True, L::True, L::True};
  EXPECT_NEAR(macro_f1(pred, gold), 0.5 / 3.0, 1e-12);
  EXPECT_NEAR(macro_f1(pred, gold), 0.1667, 1e-4);
}

TEST(MacroF1, AgreesWithOracleOnRandomInputs) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_labels(rng, 1 + rng.uniform_index(60));
    auto g = random_labels(rng, p.size());
    EXPECT_NEAR(macro_f1(p, g), oracle::macro_f1(ints(p), ints(g)), 1e-12);
  }
}

TEST(MacroF1, EmptyFails) {
  std::vector<L> none;
  EXPECT_THROW(macro_f1(none, none), InvalidArgument);
}

TEST(Bootstrap, DegenerateCases) {
  std::vector<L> g = {L::True, L::False, L::CannotAnswer, L::True};
  auto perfect = bootstrap_ci(results_of(g, g), 500);
  EXPECT_DOUBLE_EQ(perfect.lower, 1.0);
  EXPECT_DOUBLE_EQ(perfect.point, 1.0);
  EXPECT_DOUBLE_EQ(perfect.upper, 1.0);
  auto single = bootstrap_ci(results_of({L::True}, {L::False}), 200);
  EXPECT_DOUBLE_EQ(single.lower, single.point);
  EXPECT_DOUBLE_EQ(single.upper, single.point);
}

TEST(Bootstrap, MatchesIndependentResampling) {
  Rng rng(9);
  auto g = random_labels(rng, 90);
  auto p = g;
  for (std::size_t i = 0; i < p.size(); i += 3) p[i] = static_cast<L>((static_cast<int>(p[i]) + 1) % 3);
  auto ci = bootstrap_ci(results_of(p, g), 2000, 0.95, 77);
  auto want = oracle::bootstrap(ints(p), ints(g), 2000, 0.95, 77);
  EXPECT_NEAR(ci.lower, want.lower, 1e-12);
  EXPECT_EQ(ci.point, macro_f1(p, g));
  EXPECT_NEAR(ci.upper, want.upper, 1e-12);
  EXPECT_LE(ci.lower, ci.point);
  EXPECT_GE(ci.upper, ci.point);
}

TEST(McNemar, WorkedExamples) {
  auto run = [](std::size_t b, std::size_t c, std::size_t both) {
    std::vector<bool> a, bb;
    for (std::size_t i = 0; i < b; ++i) a.push_back(true), bb.push_back(false);
    for (std::size_t i = 0; i < c; ++i) a.push_back(false), bb.push_back(true);
    for (std::size_t i = 0; i < both; ++i) a.push_back(true), bb.push_back(true);
    return mcnemar(a, bb);
  };
  EXPECT_DOUBLE_EQ(run(0, 0, 10).p_value, 1.0);
  auto r = run(5, 15, 3);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, 0.041389, 1e-6);
  EXPECT_NEAR(r.p_value, oracle::binomial_two_sided(5, 15), 1e-12);
  EXPECT_TRUE(r.significant);
  EXPECT_DOUBLE_EQ(run(10, 10, 0).p_value, 1.0);
  auto big = run(40, 10, 0);
  EXPECT_FALSE(big.exact);
  EXPECT_NEAR(big.p_value, std::erfc(std::sqrt(29.0 * 29.0 / 50.0 / 2.0)), 1e-12);
}

TEST(McNemar, ExactMatchesBinomialOracle) {
  for (std::size_t b = 0; b < 25; ++b) {
    for (std::size_t c = 0; b + c < 25; ++c) {
      std::vector<bool> x, y;
      for (std::size_t i = 0; i < b; ++i) x.push_back(true), y.push_back(false);
      for (std::size_t i = 0; i < c; ++i) x.push_back(false), y.push_back(true);
      EXPECT_NEAR(mcnemar(x, y).p_value, oracle::binomial_two_sided(b, c), 1e-12) << b << "," << c;
    }
  }
}

TEST(Kappa, WorkedExamples) {
  std::vector<L> a = {L::True, L::False, L::CannotAnswer, L::True};
  EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
  std::vector<L> half = {L::True, L::True, L::False, L::False}, constant(4, L::True);
  EXPECT_NEAR(cohens_kappa(half, constant), 0.0, 1e-12);
  std::vector<L> same(5, L::False);
  EXPECT_DOUBLE_EQ(cohens_kappa(same, same), 1.0);
}

TEST(Kappa, CraftedTable) {
  std::vector<std::vector<double>> table = {{20, 5, 1}, {3, 15, 2}, {2, 4, 8}};
  std::vector<L> a, b;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int n = 0; n < table[i][j]; ++n) {
        a.push_back(static_cast<L>(i));
        b.push_back(static_cast<L>(j));
      }
    }
  }
  EXPECT_NEAR(cohens_kappa(a, b), oracle::kappa_from_table(table), 1e-12);
}

TEST(Compare, SingleMethodHasNoPairs) {
  std::vector<L> g = {L::True, L::False};
  auto r = compare_methods({{"only", results_of(g, g)}}, 123, 100);
  EXPECT_EQ(r.methods.size(), 1u);
  EXPECT_TRUE(r.pairwise.empty());
}

TEST(Compare, DominatingMethod) {
  std::vector<L> gold(60);
  for (std::size_t i = 0; i < gold.size(); ++i) gold[i] = static_cast<L>(i % 3);
  auto worse = gold;
  for (std::size_t i = 0; i < 30; ++i) worse[i] = static_cast<L>((static_cast<int>(gold[i]) + 1) % 3);
  auto r = compare_methods({{"A", results_of(gold, gold, "A")}, {"B", results_of(worse, gold, "B")}}, 123, 500);
  EXPECT_GT(r.methods[0].f1.point, r.methods[1].f1.point);
  ASSERT_EQ(r.pairwise.size(), 1u);
  EXPECT_EQ(r.pairwise[0].result.b, 30u);
  EXPECT_EQ(r.pairwise[0].result.c, 0u);
  EXPECT_TRUE(r.pairwise[0].result.significant);
  EXPECT_NE(r.to_text().find(" Y"), std::string::npos);
}

TEST(Compare, IdenticalMethods) {
  Rng rng(3);
  auto g = random_labels(rng, 30), p = random_labels(rng, 30);
  auto r = compare_methods({{"A", results_of(p, g, "A")}, {"B", results_of(p, g, "B")}, {"C", results_of(p, g, "C")}},
                           123, 200);
  for (const auto& pw : r.pairwise) {
    EXPECT_DOUBLE_EQ(pw.result.p_value, 1.0);
    EXPECT_FALSE(pw.result.significant);
  }
  auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["pairwise"].size(), 3u);
}

TEST(Compare, MismatchedCoverageFails) {
  std::vector<L> g = {L::True, L::False, L::True};
  auto a = results_of(g, g, "A");
  auto b = results_of(g, g, "B");
  b.pop_back();
  EXPECT_THROW(compare_methods({{"A", a}, {"B", b}}, 123, 10), InvalidArgument);
}

TEST(ResultsFile, RoundTripAndDuplicates) {
  auto path = std::filesystem::temp_directory_path() / "userprof_results.jsonl";
  auto rs = results_of({L::True, L::CannotAnswer}, {L::False, L::CannotAnswer});
  write_results_jsonl(path, rs);
  auto back = read_results_jsonl(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].predicted, L::CannotAnswer);
  rs.push_back(rs[0]);
  write_results_jsonl(path, rs);
  EXPECT_THROW(read_results_jsonl(path), Error);
  std::filesystem::remove(path);
}

TEST(GoldFile, RoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "userprof_gold.jsonl";
  std::map<PairKey, L> gold = {{{"u1", "S01"}, L::True}, {{"u2", "S01"}, L::CannotAnswer}};
  write_gold_jsonl(path, gold);
  EXPECT_EQ(read_gold_jsonl(path), gold);
  std::filesystem::remove(path);
}
