#include <gtest/gtest.h>

#include "oracles.hpp"
#include "userprof/embedding.hpp"
#include "userprof/error.hpp"
#include "userprof/pooling.hpp"
#include "userprof/random.hpp"

using namespace userprof;

namespace {

EmbeddedSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedSet s;
  for (std::size_t i = 0; i < n; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "t%04zu", i);
    s.ids.push_back(id);
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    normalize_in_place(v);
    s.vectors.append_row(v);
  }
  return s;
}

// Two tight clusters of near-duplicates plus scattered vectors.
EmbeddedSet near_duplicate_fixture(std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedSet s;
  Vector a(16, 0.0), b(16, 0.0);
  a[0] = 1.0;
  b[1] = 1.0;
  for (std::size_t i = 0; i < 30; ++i) {
    Vector v(16);
    for (auto& x : v) x = 0.02 * rng.normal();
    if (i < 12) {
      for (std::size_t d = 0; d < 16; ++d) v[d] += a[d];
    } else if (i < 24) {
      for (std::size_t d = 0; d < 16; ++d) v[d] += b[d];
    } else {
      for (auto& x : v) x += rng.normal();
    }
    normalize_in_place(v);
    s.ids.push_back("x" + std::to_string(100 + i));
    s.vectors.append_row(v);
  }
  return s;
}

std::vector<oracle::Vec> rows(const EmbeddedSet& s) {
  std::vector<oracle::Vec> out;
  for (std::size_t i = 0; i < s.vectors.rows(); ++i) out.emplace_back(s.vectors.row(i).begin(), s.vectors.row(i).end());
  return out;
}

}  // namespace

TEST(PoolRandom, Basics) {
  std::vector<std::string> ids = {"a", "b", "c"};
  EXPECT_EQ(pool_random(ids, 5, 1).size(), 3u);
  EXPECT_TRUE(pool_random(ids, 0, 1).empty());
  EXPECT_EQ(pool_random(ids, 2, 9), pool_random(ids, 2, 9));
  auto all = pool_random(ids, 3, 4);
  EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), 3u);
}

TEST(MeanNearest, SingleAndMeanDirection) {
  EmbeddedSet one;
  one.ids = {"only"};
  one.vectors.append_row(std::vector<double>{1, 0});
  EXPECT_EQ(pool_mean_nearest(one, 3), (std::vector<std::string>{"only"}));

  EmbeddedSet s;
  s.ids = {"a", "b", "c"};
  s.vectors.append_row(std::vector<double>{1, 0});
  s.vectors.append_row(std::vector<double>{0, 1});
  s.vectors.append_row(std::vector<double>{std::sqrt(0.5), std::sqrt(0.5)});
  EXPECT_EQ(pool_mean_nearest(s, 1), (std::vector<std::string>{"c"}));
}

TEST(MeanNearest, MatchesExhaustiveSort) {
  auto s = random_set(50, 8, 3);
  auto got = pool_mean_nearest(s, 50);
  auto rs = rows(s);
  oracle::Vec mean(8, 0.0);
  for (const auto& r : rs) {
    for (std::size_t d = 0; d < 8; ++d) mean[d] += r[d] / 50.0;
  }
  std::vector<std::pair<std::string, oracle::Vec>> items;
  for (std::size_t i = 0; i < rs.size(); ++i) items.emplace_back(s.ids[i], rs[i]);
  auto want = oracle::knn(items, mean, 50);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i].id);
}

TEST(Stratified, SingleClusterIsRandom) {
  EmbeddedSet s;
  for (int i = 0; i < 12; ++i) {
    s.ids.push_back("s" + std::to_string(i));
    s.vectors.append_row(std::vector<double>{1, 0, 0});
  }
  EXPECT_EQ(pool_stratified_kmeans(s, 5, 123), pool_random(s.ids, 5, 123));
}

TEST(Stratified, SizeIsMinOfNAndTweets) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n_tweets = 1 + rng.uniform_index(60);
    std::size_t n = rng.uniform_index(40);
    auto s = random_set(n_tweets, 6, 100 + trial);
    auto out = pool_stratified_kmeans(s, n, 123);
    EXPECT_EQ(out.size(), std::min(n, n_tweets));
    EXPECT_EQ(std::set<std::string>(out.begin(), out.end()).size(), out.size());
  }
}

TEST(IterativeElimination, IdenticalTweetsRefill) {
  EmbeddedSet s;
  for (int i = 0; i < 30; ++i) {
    s.ids.push_back("d" + std::to_string(10 + i));
    s.vectors.append_row(std::vector<double>{0.6, 0.8});
  }
  PoolingConfig cfg;
  auto out = pool_iterative_elimination(s, cfg);
  EXPECT_EQ(out.ids.size(), cfg.n_select);
  EXPECT_EQ(out.refilled, cfg.n_select - 1);
}

TEST(IterativeElimination, OrthogonalVectorsNoElimination) {
  EmbeddedSet s;
  for (int i = 0; i < 25; ++i) {
    Vector v(25, 0.0);
    v[static_cast<std::size_t>(i)] = 1.0 + 0.01 * i;
    normalize_in_place(v);
    s.ids.push_back("o" + std::to_string(10 + i));
    s.vectors.append_row(v);
  }
  PoolingConfig cfg;
  auto out = pool_iterative_elimination(s, cfg);
  EXPECT_EQ(out.refilled, 0u);
  EXPECT_EQ(out.ids, pool_mean_nearest(s, cfg.n_select));
}

TEST(IterativeElimination, MatchesStraightLineOracle) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto s = near_duplicate_fixture(seed);
    for (double init : {0.9, 0.6}) {
      PoolingConfig cfg;
      cfg.initial_threshold = init;
      cfg.decay_floor = 0.3;
      cfg.decay_alpha = 0.1;
      auto got = pool_iterative_elimination(s, cfg);
      auto want = oracle::iterative_elimination(s.ids, rows(s), cfg.n_select, cfg.initial_threshold,
                                                cfg.decay_alpha, cfg.decay_floor);
      EXPECT_EQ(got.ids, want);
    }
  }
}

TEST(IterativeElimination, ThresholdSchedule) {
  PoolingConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.threshold_at(0), 0.9);
  EXPECT_NEAR(cfg.threshold_at(1), 0.9 - 0.02 * std::log(2.0), 1e-15);
  cfg.decay_alpha = 1.0;
  EXPECT_DOUBLE_EQ(cfg.threshold_at(100), cfg.decay_floor);
}

TEST(AssemblePool, SmallUserGetsEverything) {
  auto s = random_set(10, 8, 1);
  auto pool = assemble_pool("u", s, PoolingConfig{});
  EXPECT_EQ(pool.tweet_ids.size(), 10u);
  for (const auto& id : pool.tweet_ids) EXPECT_EQ(pool.provenance.at(id).size(), 4u);
}

TEST(AssemblePool, BoundedWithProvenanceAndDeterministic) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = random_set(300, 16, seed);
    PoolingConfig cfg;
    auto pool = assemble_pool("u", s, cfg);
    EXPECT_LE(pool.tweet_ids.size(), 4 * cfg.n_select);
    EXPECT_EQ(pool.provenance.size(), pool.tweet_ids.size());
    for (const auto& id : pool.tweet_ids) EXPECT_FALSE(pool.provenance.at(id).empty());
    auto again = assemble_pool("u", s, cfg);
    EXPECT_EQ(again.tweet_ids, pool.tweet_ids);
    EXPECT_EQ(again.provenance, pool.provenance);
  }
}

TEST(AssemblePool, IsUnionOfMethodOutputs) {
  auto s = random_set(5000, 64, 42);
  PoolingConfig cfg;
  auto pool = assemble_pool("u", s, cfg);
  std::map<std::string, std::set<PoolMethod>> want;
  auto tag = [&](const std::vector<std::string>& ids, PoolMethod m) {
    for (const auto& id : ids) want[id].insert(m);
  };
  tag(pool_random(s.ids, cfg.n_select, cfg.seed), PoolMethod::random);
  tag(pool_mean_nearest(s, cfg.n_select), PoolMethod::mean_nearest);
  tag(pool_stratified_kmeans(s, cfg.n_select, cfg.seed, cfg.k_max), PoolMethod::stratified_kmeans);
  tag(pool_iterative_elimination(s, cfg).ids, PoolMethod::iterative_elimination);
  EXPECT_EQ(pool.provenance, want);
  EXPECT_EQ(pool.tweet_ids.size(), want.size());
  EXPECT_LE(pool.tweet_ids.size(), 80u);
  // Nothing is close enough to eliminate, so elimination coincides with mean-nearest.
  EXPECT_EQ(pool_iterative_elimination(s, cfg).ids, pool_mean_nearest(s, cfg.n_select));
}

TEST(AssemblePool, ProvenanceMergesOverlaps) {
  auto s = random_set(25, 8, 6);
  auto pool = assemble_pool("u", s, PoolingConfig{});
  std::size_t total_tags = 0;
  for (const auto& [id, methods] : pool.provenance) total_tags += methods.size();
  EXPECT_EQ(total_tags, 4u * 20u);
  EXPECT_LT(pool.tweet_ids.size(), 80u);
}

TEST(AssemblePool, JsonlRoundTrip) {
  auto s = random_set(40, 8, 2);
  std::vector<UserPool> pools = {assemble_pool("a", s, PoolingConfig{})};
  auto path = std::filesystem::temp_directory_path() / "userprof_pools.jsonl";
  write_pools_jsonl(path, pools);
  auto back = read_pools_jsonl(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].tweet_ids, pools[0].tweet_ids);
  EXPECT_EQ(back[0].provenance, pools[0].provenance);
  std::filesystem::remove(path);
}

TEST(PoolingConfig, Validation) {
  PoolingConfig cfg;
  cfg.n_select = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.decay_floor = 0.95;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}
