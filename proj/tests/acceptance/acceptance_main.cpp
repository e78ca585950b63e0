// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "userprof/annotation.hpp"
#include "userprof/clustering.hpp"
#include "userprof/community.hpp"
#include "userprof/domain_filter.hpp"
#include "userprof/embedding.hpp"
#include "userprof/evaluation.hpp"
#include "userprof/pipeline.hpp"
#include "userprof/pooling.hpp"
#include "userprof/random.hpp"
#include "userprof/retrieval.hpp"
#include "userprof/synth.hpp"
#include "userprof/vector_index.hpp"

using namespace userprof;
using json = nlohmann::json;
using L = StanceLabel;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kScoreTol = 1e-9;
constexpr double kModularitySlack = 0.02;
constexpr double kStatTol = 1e-6;
constexpr double kEq1Budget = 10.0;
constexpr double kRetrievalBudget = 5.0;
constexpr double kLouvainBudget = 1.0;
constexpr double kE2eBudget = 60.0;
constexpr double kScaleBudget = 60.0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Collects failure reasons; a criterion passes when none were recorded.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// ---- Distance labelling----------------------------------------------------------

void eq1_oracle(Check& c, std::string& detail) {
  HashingEmbedder e(256);
  Rng rng(123);
  std::vector<std::pair<std::string, Vector>> items;
  std::vector<oracle::Vec> chunk_rows;
  for (std::size_t i = 0; i < 200; ++i) {
    items.emplace_back("c" + std::to_string(i), e.embed(synth::chunk_text(rng)));
    chunk_rows.push_back(items.back().second);
  }
  auto t0 = Clock::now();
  auto index = VectorIndex::build(items);
  EmbeddedSet tweets;
  auto texts = synth::tweet_texts(1000, 0.4, 7);
  for (std::size_t i = 0; i < texts.size(); ++i) tweets.ids.push_back("t" + std::to_string(i));
  tweets.vectors = e.embed_batch(texts);
  FilterConfig cfg;
  cfg.theta = 0.7;
  cfg.k = 10;
  auto labels = label_all(tweets, index, cfg);
  double elapsed = seconds_since(t0);

  std::size_t matched = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = tweets.vectors.row(i);
    auto want = oracle::eq1({row.begin(), row.end()}, chunk_rows, cfg.k, cfg.theta);
    bool same = std::abs(labels[i].mean_distance - want.mean) <= kScoreTol &&
                static_cast<int>(labels[i].label) == static_cast<int>(want.band) && labels[i].tweet_id == tweets.ids[i];
    matched += same;
  }
  c.expect(matched == 1000, std::to_string(1000 - matched) + " tweets differ");
  c.expect(elapsed < kEq1Budget, "took " + fmt(elapsed) + " s");
  detail = std::to_string(matched) + "/1000 match, " + fmt(elapsed) + " s";
}

// ---- Retrieval ---------------------------------------------------------------

void retrieval_oracles(Check& c, std::string& detail) {
  Rng rng(123);
  std::vector<std::string> vocab;
  for (int i = 0; i < 80; ++i) vocab.push_back("w" + std::to_string(i));
  std::vector<std::pair<std::string, std::string>> docs;
  for (std::size_t i = 0; i < 500; ++i) {
    std::string t;
    std::size_t len = 3 + rng.uniform_index(25);
    for (std::size_t j = 0; j < len; ++j) t += vocab[std::min(rng.uniform_index(80), rng.uniform_index(80))] + " ";
    docs.emplace_back("doc" + std::to_string(1000 + i), t);
  }
  std::vector<std::string> queries;
  for (int q = 0; q < 50; ++q) {
    std::string s;
    std::size_t len = 1 + rng.uniform_index(4);
    for (std::size_t j = 0; j < len; ++j) s += vocab[rng.uniform_index(80)] + " ";
    queries.push_back(s);
  }

  HashingEmbedder e(256);
  std::vector<std::string> ids, texts;
  for (const auto& [id, t] : docs) ids.push_back(id), texts.push_back(t);

  auto t0 = Clock::now();
  auto bm25 = Bm25Index::build(docs);
  auto matrix = e.embed_batch(texts);
  auto dense = VectorIndex::build(ids, matrix);
  std::vector<std::vector<ScoredDoc>> bm25_got;
  std::vector<std::vector<Neighbor>> dense_got;
  std::vector<Vector> qvecs;
  for (const auto& q : queries) {
    bm25_got.push_back(bm25_rank(bm25, q, docs.size()));
    qvecs.push_back(e.embed(q));
    dense_got.push_back(dense_rank(dense, qvecs.back(), docs.size()));
  }
  double elapsed = seconds_since(t0);

  std::vector<std::pair<std::string, oracle::Vec>> items;
  for (std::size_t i = 0; i < ids.size(); ++i) items.emplace_back(ids[i], oracle::Vec(matrix.row(i).begin(), matrix.row(i).end()));
  std::size_t bad = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto want = oracle::bm25(docs, queries[q]);
    bool ok = want.size() == bm25_got[q].size();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
      ok = want[i].first == bm25_got[q][i].id && std::abs(want[i].second - bm25_got[q][i].score) <= kScoreTol;
    }
    auto dwant = oracle::knn(items, qvecs[q], docs.size());
    ok = ok && dwant.size() == dense_got[q].size();
    for (std::size_t i = 0; ok && i < dwant.size(); ++i) {
      ok = dwant[i].id == dense_got[q][i].id && std::abs(dwant[i].distance - dense_got[q][i].distance) <= kScoreTol;
    }
    bad += !ok;
  }
  c.expect(bad == 0, std::to_string(bad) + " queries differ");
  c.expect(elapsed < kRetrievalBudget, "took " + fmt(elapsed) + " s");
  detail = std::to_string(queries.size() - bad) + "/50 queries match, " + fmt(elapsed) + " s";
}

// ---- Louvain ----------------------------------------------------------------

void louvain_planted(Check& c, std::string& detail) {
  Rng rng(123);
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t j = i + 1; j < 100; ++j) {
      double p = i / 25 == j / 25 ? 0.3 : 0.01;
      if (rng.uniform01() < p) edges.emplace_back(i, j, 1.0);
    }
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < 100; ++i) names.push_back("n" + std::to_string(1000 + i));
  auto g = WeightedGraph::from_edges(names, edges);
  auto t0 = Clock::now();
  auto p = louvain(g, 1.0, 123);
  double elapsed = seconds_since(t0);

  std::vector<std::size_t> planted(100), found(100);
  for (std::size_t i = 0; i < 100; ++i) {
    planted[i] = i / 25;
    found[i] = p.assignment.at(names[i]);
  }
  double q_planted = oracle::modularity(100, edges, planted);
  double q_recomputed = oracle::modularity(100, edges, found);
  c.expect(p.modularity >= q_planted - kModularitySlack, "modularity below planted");
  c.expect(std::abs(p.modularity - q_recomputed) <= kScoreTol, "reported modularity differs from recomputation");
  c.expect(elapsed < kLouvainBudget, "took " + fmt(elapsed) + " s");
  detail = "Q=" + fmt(p.modularity) + " planted=" + fmt(q_planted) + ", " + fmt(elapsed) + " s";
}

// ---- Pooling ----------------------------------------------------------------

EmbeddedSet thirty_vectors(std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedSet s;
  for (std::size_t i = 0; i < 30; ++i) {
    Vector v(16);
    for (auto& x : v) x = 0.03 * rng.normal();
    if (i < 12) {
      v[0] += 1.0;
    } else if (i < 22) {
      v[1] += 1.0;
    } else {
      for (auto& x : v) x += rng.normal();
    }
    normalize_in_place(v);
    s.ids.push_back("x" + std::to_string(100 + i));
    s.vectors.append_row(v);
  }
  return s;
}

EmbeddedSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddedSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back("t" + std::to_string(10000 + i));
    Vector v(dim);
    for (auto& x : v) x = rng.normal();
    normalize_in_place(v);
    s.vectors.append_row(v);
  }
  return s;
}

void pooling(Check& c, std::string& detail) {
  std::size_t alg1_ok = 0, alg1_total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = thirty_vectors(seed);
    std::vector<oracle::Vec> rows;
    for (std::size_t i = 0; i < 30; ++i) rows.emplace_back(s.vectors.row(i).begin(), s.vectors.row(i).end());
    for (double init : {0.9, 0.6}) {
      PoolingConfig cfg;
      cfg.seed = 123;
      cfg.initial_threshold = init;
      cfg.decay_alpha = 0.1;
      cfg.decay_floor = 0.3;
      auto got = pool_iterative_elimination(s, cfg);
      auto want = oracle::iterative_elimination(s.ids, rows, cfg.n_select, cfg.initial_threshold, cfg.decay_alpha,
                                                cfg.decay_floor);
      alg1_ok += got.ids == want;
      ++alg1_total;
    }
  }
  c.expect(alg1_ok == alg1_total, "iterative elimination differs on " + std::to_string(alg1_total - alg1_ok));

  Rng rng(123);
  std::size_t quota_ok = 0;
  for (int f = 0; f < 100; ++f) {
    std::size_t clusters = 1 + rng.uniform_index(8);
    std::vector<std::size_t> sizes(clusters);
    std::size_t total = 0;
    for (auto& s : sizes) total += (s = 1 + rng.uniform_index(40));
    std::size_t n = 1 + rng.uniform_index(60);
    auto q = allocate_quotas(sizes, std::min(n, total));
    std::size_t sum = 0;
    bool within = true;
    for (std::size_t i = 0; i < q.size(); ++i) {
      sum += q[i];
      within = within && q[i] <= sizes[i];
    }
    auto tweets = random_set(total, 8, 500 + f);
    auto strat = pool_stratified_kmeans(tweets, n, 123);
    quota_ok += sum == std::min(n, total) && within && strat.size() == std::min(n, total);
  }
  c.expect(quota_ok == 100, std::to_string(100 - quota_ok) + " quota fixtures wrong");

  std::size_t pool_ok = 0, largest = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = random_set(400, 32, seed);
    PoolingConfig cfg;
    cfg.n_select = 20;
    cfg.seed = 123;
    auto pool = assemble_pool("u", s, cfg);
    auto again = assemble_pool("u", s, cfg);
    bool ok = pool.tweet_ids.size() <= 80 && pool.provenance.size() == pool.tweet_ids.size();
    for (const auto& id : pool.tweet_ids) ok = ok && pool.provenance.count(id) && !pool.provenance.at(id).empty();
    ok = ok && again.tweet_ids == pool.tweet_ids && again.provenance == pool.provenance;
    largest = std::max(largest, pool.tweet_ids.size());
    pool_ok += ok;
  }
  c.expect(pool_ok == 10, "assembled pools violate the bound, provenance or determinism");
  detail = "elimination " + std::to_string(alg1_ok) + "/" + std::to_string(alg1_total) + ", quotas " +
           std::to_string(quota_ok) + "/100, largest pool " + std::to_string(largest);
}

// ---- Statistics -------------------------------------------------------------

void statistics(Check& c, std::string& detail) {
  std::vector<bool> a, b;
  for (int i = 0; i < 5; ++i) a.push_back(true), b.push_back(false);
  for (int i = 0; i < 15; ++i) a.push_back(false), b.push_back(true);
  for (int i = 0; i < 3; ++i) a.push_back(true), b.push_back(true);
  auto m = mcnemar(a, b);
  c.expect(m.exact && std::abs(m.p_value - 0.041389) <= kStatTol, "mcnemar p=" + fmt(m.p_value));
  c.expect(std::abs(m.p_value - oracle::binomial_two_sided(5, 15)) <= kStatTol, "mcnemar differs from binomial oracle");

  std::vector<L> gold = {L::True, L::False, L::CannotAnswer}, pred(3, L::True);
  double f1 = macro_f1(pred, gold);
  c.expect(std::abs(f1 - 1.0 / 6.0) <= kStatTol, "macro=" + fmt(f1));

  std::vector<L> half = {L::True, L::True, L::False, L::False}, constant(4, L::True);
  double k = cohens_kappa(half, constant);
  c.expect(std::abs(k) <= kStatTol, "kappa=" + fmt(k));

  Rng rng(123);
  std::vector<EvalResult> results;
  std::vector<L> p2, g2;
  for (int i = 0; i < 150; ++i) {
    auto g = static_cast<L>(rng.uniform_index(3));
    auto p = rng.uniform01() < 0.7 ? g : static_cast<L>(rng.uniform_index(3));
    results.push_back({"u" + std::to_string(i / 15), "S" + std::to_string(i % 15), "m", p, g});
    p2.push_back(p), g2.push_back(g);
  }
  auto ci = bootstrap_ci(results, 2000, 0.95, 123);
  c.expect(ci.point == macro_f1(p2, g2), "bootstrap point differs from full-sample macro-F1");
  c.expect(ci.lower <= ci.point && ci.point <= ci.upper, "interval does not contain the point");
  detail = "p=" + fmt(m.p_value) + " macro=" + fmt(f1) + " kappa=" + fmt(k);
}

// ---- Pipelines --------------------------------------------------------------

std::vector<json> read_jsonl(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void end_to_end(Check& c, std::string& detail, const std::filesystem::path& work) {
  auto dir = work / "e2e";
  std::filesystem::remove_all(dir);
  auto fx = synth::write_e2e_fixture(dir);
  std::ostringstream log;
  auto t0 = Clock::now();
  Pipeline p(PipelineConfig::load(fx.config), log);
  p.run_all(true);
  double elapsed = seconds_since(t0);

  double f1 = -1.0;
  std::size_t pairs = 0;
  const auto report = read_json(p.stage_dir(Stage::evaluate) / "report.json");
  for (const auto& m : report["methods"]) {
    if (m["method"] == "extractive") {
      f1 = m["macro_f1"].get<double>();
      pairs = m["pairs"].get<std::size_t>();
    }
  }
  auto violations = read_json(p.stage_dir(Stage::profile) / "groundedness.json")["violation_count"].get<std::size_t>();
  c.expect(pairs == 300, "extractive pairs " + std::to_string(pairs));
  c.expect(f1 == 1.0, "extractive macro-F1 " + fmt(f1));
  c.expect(violations == 0, std::to_string(violations) + " groundedness violations");
  c.expect(elapsed < kE2eBudget, "took " + fmt(elapsed) + " s");
  detail = "macro-F1 " + fmt(f1) + " over " + std::to_string(pairs) + " pairs, " + std::to_string(violations) +
           " violations, " + fmt(elapsed) + " s";
}

void default_shape(Check& c, std::string& detail, const std::filesystem::path& work) {
  auto dir = work / "default_shape";
  std::filesystem::remove_all(dir);
  auto fx = synth::write_default_shape_fixture(dir);
  std::ostringstream log;
  auto cfg = PipelineConfig::load(fx.config);
  c.expect(cfg.filter.theta == 0.7 && cfg.filter.k == 10 && cfg.sample.seed == 123 && cfg.statement_users == 50 &&
               cfg.profile_users == 100 && cfg.statement_count == 15 && cfg.pooling.n_select == 20,
           "fixture does not use the default configuration");
  Pipeline p(cfg, log);
  p.run_all(true);

  std::map<std::string, std::set<std::pair<std::string, std::string>>> pairs_by_method;
  std::set<std::string> users;
  for (const auto& r : read_jsonl(p.stage_dir(Stage::evaluate) / "results.jsonl")) {
    pairs_by_method[r["method"].get<std::string>()].emplace(r["user_id"].get<std::string>(),
                                                            r["statement_id"].get<std::string>());
    users.insert(r["user_id"].get<std::string>());
  }
  std::size_t extractive_pairs = pairs_by_method["extractive"].size();
  bool every_method = !pairs_by_method.empty();
  for (const auto& [m, ps] : pairs_by_method) every_method = every_method && ps.size() == 1500;

  std::size_t largest = 0;
  auto pools = read_pools_jsonl(p.stage_dir(Stage::pool) / "pools.jsonl");
  for (const auto& pool : pools) largest = std::max(largest, pool.tweet_ids.size());

  c.expect(extractive_pairs == 1500 && every_method, "evaluation pairs per method are not 1500");
  c.expect(users.size() == 100, std::to_string(users.size()) + " profiled users");
  c.expect(largest <= 80, "largest pool " + std::to_string(largest));
  detail = std::to_string(extractive_pairs) + " pairs x " + std::to_string(pairs_by_method.size()) + " methods, " +
           std::to_string(users.size()) + " users, largest pool " + std::to_string(largest);
}

// ---- Scale ------------------------------------------------------------------

void scale_smoke(Check& c, std::string& detail) {
  HashingEmbedder e(256);
  Rng rng(123);
  std::vector<std::string> chunk_texts;
  for (int i = 0; i < 200; ++i) chunk_texts.push_back(synth::chunk_text(rng));
  auto texts = synth::tweet_texts(100000, 0.3, 123);

  auto t0 = Clock::now();
  std::vector<std::string> chunk_ids;
  for (int i = 0; i < 200; ++i) chunk_ids.push_back("c" + std::to_string(i));
  auto index = VectorIndex::build(chunk_ids, e.embed_batch(chunk_texts));
  EmbeddedSet tweets;
  tweets.ids.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) tweets.ids.push_back("t" + std::to_string(i));
  tweets.vectors = e.embed_batch(texts);
  auto labels = label_all(tweets, index, FilterConfig{});
  double elapsed = seconds_since(t0);

  auto report = distance_report(labels);
  c.expect(labels.size() == 100000, "labelled " + std::to_string(labels.size()));
  c.expect(elapsed < kScaleBudget, "took " + fmt(elapsed) + " s");
  detail = "100000 tweets in " + fmt(elapsed) + " s (" + std::to_string(report.domain) + " domain)";
}

// ---- Annotation -------------------------------------------------------------

void annotation_flow(Check& c, std::string& detail, const std::filesystem::path& work) {
  auto dir = work / "annotation";
  std::filesystem::remove_all(dir);
  auto now = std::make_shared<Timestamp>(1717200000 + 3600);
  AnnotationStore store(dir, [now] { return *now; });

  std::vector<StanceStatement> statements;
  std::map<std::string, std::vector<PoolTweet>> pools;
  std::vector<PairKey> pairs;
  for (int s = 0; s < 15; ++s) {
    char id[8];
    std::snprintf(id, sizeof id, "S%02d", s + 1);
    statements.push_back({id, "The user supports measure " + std::to_string(s + 1), StatementSource::curated});
  }
  for (int u = 0; u < 21; ++u) {
    char id[8];
    std::snprintf(id, sizeof id, "u%02d", u);
    pools[id] = {{std::string(id) + "-t1", "tram fares", 1717100000}, {std::string(id) + "-t2", "new depot", 1717100100}};
  }
  for (int u = 0; u < 2; ++u) {
    for (const auto& s : statements) pairs.emplace_back("u0" + std::to_string(u), s.id);
  }
  store.create_batch(pairs, pools, statements, {"a", "b"});

  AnnotationServerConfig cfg;
  cfg.port = 0;
  cfg.tokens = {{"ta", {"a", AnnotatorRole::primary}},
                {"tb", {"b", AnnotatorRole::primary}},
                {"tc", {"c", AnnotatorRole::adjudicator}}};
  AnnotationServer server(store, cfg);
  httplib::Client client("127.0.0.1", server.start());
  auto get = [&](const std::string& path, const std::string& token) {
    auto r = client.Get(path, {{"Authorization", "Bearer " + token}});
    return std::make_pair(r ? r->status : -1, r ? json::parse(r->body) : json());
  };
  auto post = [&](const std::string& task, const std::string& token, const std::string& label) {
    auto r = client.Post("/tasks/" + task + "/label", {{"Authorization", "Bearer " + token}},
                         json{{"label", label}}.dump(), "application/json");
    return std::make_pair(r ? r->status : -1, r ? json::parse(r->body) : json());
  };

  std::size_t agreed_final = 0, routed = 0, disagreements = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto ta = get("/tasks/next?annotator=a", "ta").second["task"];
    auto tb = get("/tasks/next?annotator=b", "tb").second["task"];
    if (ta.is_null() || tb.is_null()) break;
    bool disagree = i % 5 == 0;
    disagreements += disagree;
    post(ta["task_id"], "ta", "True");
    auto [s, body] = post(tb["task_id"], "tb", disagree ? "False" : "True");
    agreed_final += !disagree && s == 200 && body["status"] == "final";
    routed += disagree && s == 200 && body["status"] == "adjudication";
  }
  c.expect(agreed_final == pairs.size() - disagreements, "agreeing pairs did not finalize");
  c.expect(routed == disagreements, "disagreements did not route to adjudication");

  std::size_t adjudicated = 0;
  for (;;) {
    auto [s, body] = get("/adjudication/next", "tc");
    if (s != 200 || body["task"].is_null()) break;
    if (post(body["task"]["task_id"], "tc", "CannotAnswer").second["status"] == "final") ++adjudicated;
  }
  c.expect(adjudicated == disagreements, "adjudication finalized " + std::to_string(adjudicated));

  auto [se, exported] = get("/export", "ta");
  c.expect(se == 200 && exported["gold"].size() == 30, "export failed");
  std::map<std::string, L> by_task;
  for (const auto& r : store.records()) by_task[r.task_id] = r.label;
  std::vector<L> la, lb;
  for (const auto& [u, s] : pairs) {
    la.push_back(by_task.at(u + ":" + s + ":a"));
    lb.push_back(by_task.at(u + ":" + s + ":b"));
  }
  double kappa = se == 200 ? exported["kappa"].get<double>() : -2.0;
  c.expect(std::abs(kappa - cohens_kappa(la, lb)) <= 1e-9, "export kappa differs");

  // Same-day cap on a larger batch.
  std::vector<PairKey> more;
  for (int u = 2; u < 21; ++u) {
    char id[8];
    std::snprintf(id, sizeof id, "u%02d", u);
    for (const auto& s : statements) more.emplace_back(id, s.id);
  }
  store.create_batch(more, pools, statements, {"a", "b"});
  std::size_t accepted = store.labels_today("a");
  int last_status = 0;
  while (accepted < 300) {
    auto t = get("/tasks/next?annotator=a", "ta").second["task"];
    if (t.is_null() || post(t["task_id"], "ta", "True").first != 200) break;
    ++accepted;
  }
  last_status = post(more.back().first + ":" + more.back().second + ":a", "ta", "True").first;
  c.expect(accepted == 300 && last_status == 429, "301st label returned " + std::to_string(last_status));
  server.stop();
  detail = "30 pairs, " + std::to_string(disagreements) + " adjudicated, kappa " + fmt(kappa) + ", 301st label -> " +
           std::to_string(last_status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::filesystem::path work = std::filesystem::temp_directory_path() / "userprof_acceptance";
  app.add_option("--work-dir", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(work);

  struct Criterion {
    std::string tier;
    std::string name;
    std::function<void(Check&, std::string&)> run;
  };
  std::vector<Criterion> criteria = {
      {"PRIMARY", "distance labelling matches all-pairs oracle", eq1_oracle},
      {"PRIMARY", "bm25 and dense ranking match exhaustive oracles", retrieval_oracles},
      {"PRIMARY", "louvain on planted 4-block graph", louvain_planted},
      {"PRIMARY", "pooling oracle, quotas, bound and provenance", pooling},
      {"PRIMARY", "statistics worked examples", statistics},
      {"PRIMARY", "end-to-end synthetic run", [&](Check& c, std::string& d) { end_to_end(c, d, work); }},
      {"PRIMARY", "default-shape pair counts and pool bound", [&](Check& c, std::string& d) { default_shape(c, d, work); }},
      {"PRIMARY", "scale smoke: 100k tweets filtered", scale_smoke},
      {"SECONDARY", "annotation flow over http", [&](Check& c, std::string& d) { annotation_flow(c, d, work); }},
  };

  bool any_failed = false;
  for (const auto& cr : criteria) {
    Check check;
    std::string detail;
    try {
      cr.run(check, detail);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("exception: ") + e.what());
    }
    bool ok = check.failures.empty();
    std::cout << (ok ? "PASS" : "FAIL") << " [" << cr.tier << "] " << cr.name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    for (const auto& f : check.failures) std::cout << "; " << f;
    std::cout << std::endl;
    any_failed = any_failed || !ok;
  }
  return any_failed ? 1 : 0;
}
