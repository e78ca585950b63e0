#include "userprof/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "userprof/annotation.hpp"
#include "userprof/digest.hpp"
#include "userprof/evaluation.hpp"
#include "userprof/knowledge_base.hpp"
#include "userprof/profiling.hpp"
#include "userprof/retrieval.hpp"
#include "userprof/text.hpp"
#include "userprof/version.hpp"
#include "work_queue.hpp"

namespace userprof {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::kb: return "kb";
    case Stage::filter: return "filter";
    case Stage::sample: return "sample";
    case Stage::pool: return "pool";
    case Stage::statements: return "statements";
    case Stage::profile: return "profile";
    case Stage::evaluate: return "evaluate";
    case Stage::serve_annotation: return "serve-annotation";
    case Stage::report: return "report";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (Stage st : {Stage::ingest, Stage::kb, Stage::filter, Stage::sample, Stage::pool, Stage::statements,
                   Stage::profile, Stage::evaluate, Stage::serve_annotation, Stage::report}) {
    if (s == to_string(st)) return st;
  }
  throw InvalidArgument("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& artifact_stages() {
  static const std::vector<Stage> stages = {Stage::ingest,     Stage::kb,      Stage::filter,
                                            Stage::sample,     Stage::pool,    Stage::statements,
                                            Stage::profile,    Stage::evaluate, Stage::report};
  return stages;
}

namespace {

std::vector<Stage> direct_inputs(Stage s) {
  switch (s) {
    case Stage::ingest:
    case Stage::kb: return {};
    case Stage::filter: return {Stage::ingest, Stage::kb};
    case Stage::sample: return {Stage::ingest, Stage::filter};
    case Stage::pool: return {Stage::filter, Stage::sample};
    case Stage::statements: return {Stage::filter, Stage::sample, Stage::pool};
    case Stage::profile: return {Stage::filter, Stage::sample, Stage::pool, Stage::statements};
    case Stage::evaluate:
      return {Stage::ingest, Stage::filter, Stage::sample, Stage::pool, Stage::statements, Stage::profile};
    case Stage::serve_annotation: return {Stage::filter, Stage::sample, Stage::pool, Stage::statements};
    case Stage::report:
      return {Stage::ingest, Stage::kb,         Stage::filter,  Stage::sample,
              Stage::pool,   Stage::statements, Stage::profile, Stage::evaluate};
  }
  return {};
}

}  // namespace

std::vector<Stage> upstream_of(Stage s) {
  std::set<Stage> all;
  std::vector<Stage> stack = direct_inputs(s);
  while (!stack.empty()) {
    Stage t = stack.back();
    stack.pop_back();
    if (all.insert(t).second) {
      for (Stage u : direct_inputs(t)) stack.push_back(u);
    }
  }
  return {all.begin(), all.end()};
}

namespace {

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

void write_json(const fs::path& p, const json& j) { write_file_atomic(p, j.dump(1) + "\n"); }

std::uint64_t user_seed(std::uint64_t seed, const std::string& user) {
  return seed ^ HashingEmbedder::token_hash(user);
}

/// Fills sampling parameters from the configuration into every request.
class ConfiguredGateway final : public Gateway {
 public:
  ConfiguredGateway(Gateway& inner, const PipelineConfig& cfg) : inner_(inner), cfg_(cfg) {}
  Completion complete(const CompletionRequest& req) override {
    CompletionRequest r = req;
    if (r.prompt.empty()) throw InvalidArgument("prompt must not be empty");
    r.temperature = cfg_.temperature;
    r.top_p = cfg_.top_p;
    r.max_tokens = cfg_.max_tokens;
    if (r.model_name.empty()) r.model_name = cfg_.remote.model;
    return inner_.complete(r);
  }

 private:
  Gateway& inner_;
  const PipelineConfig& cfg_;
};

struct GatewayStack {
  std::unique_ptr<Gateway> provider;
  std::unique_ptr<AuditedGateway> audited;
  std::unique_ptr<ConfiguredGateway> configured;

  GatewayStack(const PipelineConfig& cfg, const fs::path& audit_log) {
    if (cfg.gateway_provider == "mock") {
      provider = std::make_unique<MockGateway>(read_mock_rules(*cfg.mock_rules));
    } else {
      provider = std::make_unique<RemoteGateway>(cfg.remote);
    }
    audited = std::make_unique<AuditedGateway>(*provider, audit_log, cfg.gateway_provider);
    configured = std::make_unique<ConfiguredGateway>(*audited, cfg);
  }
  Gateway& get() { return *configured; }
};

/// Shared artifacts loaded lazily by the stages.
struct Workspace {
  const PipelineConfig& cfg;
  fs::path out;

  std::optional<Corpus> domain;
  std::optional<EmbeddedSet> domain_vectors;
  std::unordered_map<std::string, std::size_t> domain_row;
  std::unique_ptr<Embedder> embedder;

  fs::path dir(Stage s) const { return out / to_string(s); }

  Embedder& embed() {
    if (!embedder) embedder = make_embedder(cfg.embedder);
    return *embedder;
  }

  const Corpus& domain_corpus() {
    if (!domain) domain = Corpus::ingest(dir(Stage::filter) / "domain_corpus.jsonl", CorpusFormat::json_lines);
    return *domain;
  }

  const EmbeddedSet& domain_embedded() {
    if (!domain_vectors) {
      const auto& c = domain_corpus();
      EmbeddedSet set;
      std::vector<std::string> texts;
      for (const auto& t : c.tweets()) {
        set.ids.push_back(t.id);
        texts.push_back(t.text);
      }
      set.vectors = embed().embed_batch(texts);
      for (std::size_t i = 0; i < set.ids.size(); ++i) domain_row[set.ids[i]] = i;
      domain_vectors = std::move(set);
    }
    return *domain_vectors;
  }

  EmbeddedSet subset(const std::vector<std::string>& ids) {
    const auto& all = domain_embedded();
    EmbeddedSet s;
    for (const auto& id : ids) {
      auto it = domain_row.find(id);
      if (it == domain_row.end()) throw NotFound("tweet " + id + " is not in the domain corpus");
      s.ids.push_back(id);
      auto row = all.vectors.row(it->second);
      s.vectors.append_row(row);
    }
    return s;
  }

  TweetText text_of() {
    const Corpus* c = &domain_corpus();
    return [c](const std::string& id) -> const std::string& {
      const Tweet* t = c->find(id);
      if (!t) throw NotFound("tweet " + id + " is not in the domain corpus");
      return t->text;
    };
  }

  json split() { return read_json(dir(Stage::sample) / "split.json"); }

  std::map<std::string, UserPool> pools() {
    std::map<std::string, UserPool> out_pools;
    for (auto& p : read_pools_jsonl(dir(Stage::pool) / "pools.jsonl")) out_pools.emplace(p.user_id, std::move(p));
    return out_pools;
  }

  std::vector<StanceStatement> statements() { return read_statements_json(dir(Stage::statements) / "statements.json"); }

  std::vector<std::string> profile_users() { return split().at("profile_split").get<std::vector<std::string>>(); }
};

struct StageResult {
  std::vector<std::string> outputs;
  std::vector<std::string> notes;
};

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- stages ---------------------------------------------------------------

StageResult run_ingest(Workspace& ws, const fs::path& dir) {
  auto corpus = Corpus::ingest(ws.cfg.corpus, ws.cfg.corpus_format);
  auto graph = RetweetGraph::load(ws.cfg.graph);
  corpus.write_jsonl(dir / "corpus.jsonl");
  graph.write_jsonl(dir / "graph.jsonl");
  write_json(dir / "summary.json", {{"tweets", corpus.tweet_count()},
                                    {"users", corpus.user_count()},
                                    {"dropped_empty", corpus.dropped_empty()},
                                    {"graph_nodes", graph.nodes().size()},
                                    {"graph_edges", graph.edges().size()}});
  return {{"corpus.jsonl", "graph.jsonl", "summary.json"},
          {std::to_string(corpus.tweet_count()) + " tweets from " + std::to_string(corpus.user_count()) + " users"}};
}

StageResult run_kb(Workspace& ws, const fs::path& dir) {
  if (ws.cfg.kb_seeds.empty()) throw ConfigError("config /kb/seeds is empty");
  auto kg = KgSnapshot::load(ws.cfg.kg_snapshot);
  auto entities = expand_entities(kg, ws.cfg.kb_seeds, ws.cfg.kb_edge_types, ws.cfg.kb_depth);
  auto docs = extract_documents(kg, entities);
  auto stats = kb_stats(kg, entities, docs);
  auto chunks = build_chunks(docs, ws.embed(), ws.cfg.chunk_tokens, ws.cfg.chunk_overlap);
  if (chunks.empty()) throw Error("knowledge base produced no chunks");
  write_chunks_jsonl(dir / "chunks.jsonl", chunks);
  write_json(dir / "entities.json", json(std::vector<std::string>(entities.begin(), entities.end())));
  write_file_atomic(dir / "stats.txt", stats.line() + "\n");
  write_json(dir / "summary.json", {{"entities", entities.size()},
                                    {"documents", docs.documents.size()},
                                    {"missing_documents", docs.missing},
                                    {"chunks", chunks.size()},
                                    {"nodes", stats.nodes},
                                    {"edges", stats.edges}});
  return {{"chunks.jsonl", "entities.json", "stats.txt", "summary.json"},
          {stats.line(), std::to_string(chunks.size()) + " chunks"}};
}

StageResult run_filter(Workspace& ws, const fs::path& dir) {
  const auto& cfg = ws.cfg;
  auto corpus = Corpus::ingest(ws.dir(Stage::ingest) / "corpus.jsonl", CorpusFormat::json_lines);
  std::vector<std::pair<std::string, Vector>> items;
  for (auto& c : read_chunks_jsonl(ws.dir(Stage::kb) / "chunks.jsonl")) items.emplace_back(c.chunk_id, c.embedding);
  auto index = VectorIndex::build(std::move(items));
  if (index.size() < cfg.filter.k) {
    throw ConfigError("config /filter/k = " + std::to_string(cfg.filter.k) + " exceeds the " +
                      std::to_string(index.size()) + " knowledge chunks");
  }

  EmbeddedSet tweets;
  std::vector<std::string> texts;
  for (const auto& t : corpus.tweets()) {
    tweets.ids.push_back(t.id);
    texts.push_back(t.text);
  }
  tweets.vectors = ws.embed().embed_batch(texts);
  auto labels = label_all(tweets, index, cfg.filter, Execution::parallel);
  auto report = distance_report(labels);
  write_labels_jsonl(dir / "labels.jsonl", labels);
  write_file_atomic(dir / "distance_report.txt", report.to_text());
  write_json(dir / "distance_report.json", {{"bin_width", DistanceReport::kBinWidth},
                                            {"histogram", report.histogram},
                                            {"domain", report.domain},
                                            {"non_domain", report.non_domain},
                                            {"borderline", report.borderline},
                                            {"domain_percent", report.domain_percent()}});
  if (report.domain + report.non_domain == 0) {
    throw Error("every tweet is borderline; widen theta or revise the knowledge base");
  }

  StageResult result{{"labels.jsonl", "distance_report.txt", "distance_report.json"}, {}};
  json summary = {{"tweets", labels.size()},
                  {"eq1_domain", report.domain},
                  {"eq1_non_domain", report.non_domain},
                  {"eq1_borderline", report.borderline}};

  Matrix train_x;
  std::vector<int> train_y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].label == DomainLabel::borderline) continue;
    train_x.append_row(tweets.vectors.row(i));
    train_y.push_back(labels[i].label == DomainLabel::domain ? 1 : 0);
  }
  std::optional<LinearClassifier> model;
  try {
    auto trained = train_classifier(train_x, train_y, cfg.classifier);
    model = trained.model;
    std::vector<int> pred, gold;
    for (auto r : trained.validation_rows) {
      pred.push_back(classify(trained.model, train_x.row(r)).label == DomainLabel::domain ? 1 : 0);
      gold.push_back(train_y[r]);
    }
    write_file_atomic(dir / "classifier.json", classifier_to_json(trained.model) + "\n");
    result.outputs.push_back("classifier.json");
    if (!gold.empty()) {
      auto metrics = confusion_metrics(pred, gold, 2);
      write_file_atomic(dir / "classifier_metrics.json", metrics.to_json() + "\n");
      write_file_atomic(dir / "classifier_metrics.txt", metrics.to_text({"non_domain", "domain"}));
      result.outputs.insert(result.outputs.end(), {"classifier_metrics.json", "classifier_metrics.txt"});
    }
    summary["classifier"] = {{"train_accuracy", trained.train_accuracy},
                             {"validation_accuracy", trained.validation_accuracy},
                             {"training_examples", train_y.size()}};
  } catch (const InvalidArgument& e) {
    summary["classifier"] = {{"skipped", e.what()}};
    result.notes.push_back(std::string("classifier skipped: ") + e.what());
  }

  auto borderline = extract_borderline(labels, cfg.filter, cfg.borderline_sample);
  write_labels_jsonl(dir / "borderline_sample.jsonl", borderline);
  result.outputs.push_back("borderline_sample.jsonl");

  std::vector<std::string> keep;
  std::size_t rescued = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].label == DomainLabel::domain) {
      keep.push_back(labels[i].tweet_id);
    } else if (labels[i].label == DomainLabel::borderline && model &&
               classify(*model, tweets.vectors.row(i)).label == DomainLabel::domain) {
      keep.push_back(labels[i].tweet_id);
      ++rescued;
    }
  }
  auto domain = corpus.subset(keep);
  if (domain.tweet_count() == 0) throw Error("no tweet was labeled domain");
  domain.write_jsonl(dir / "domain_corpus.jsonl");
  result.outputs.push_back("domain_corpus.jsonl");
  summary["domain_tweets"] = domain.tweet_count();
  summary["domain_users"] = domain.user_count();
  summary["borderline_classified_domain"] = rescued;
  summary["borderline_sample"] = borderline.size();

  if (!cfg.keyword_groups.empty()) {
    auto deltas = filter_deltas(corpus, domain, cfg.keyword_groups);
    write_file_atomic(dir / "deltas.txt", deltas.to_text());
    result.outputs.push_back("deltas.txt");
  }
  write_json(dir / "summary.json", summary);
  result.outputs.push_back("summary.json");
  result.notes.insert(result.notes.begin(), std::to_string(domain.tweet_count()) + " of " +
                                                std::to_string(corpus.tweet_count()) + " tweets kept as domain");
  return result;
}

StageResult run_sample(Workspace& ws, const fs::path& dir) {
  const auto& cfg = ws.cfg;
  auto graph = RetweetGraph::load(ws.dir(Stage::ingest) / "graph.jsonl");
  auto partition = louvain(graph, cfg.resolution, cfg.sample.seed);
  write_file_atomic(dir / "partition.json", partition.to_json() + "\n");
  auto sampled = sample_users(partition, cfg.sample);
  write_json(dir / "sampled_users.json", sampled);

  const auto& domain = ws.domain_corpus();
  const auto& vecs = ws.domain_embedded();
  std::vector<std::string> eligible;
  Matrix user_vectors;
  for (const auto& u : sampled) {
    auto tweets = domain.tweets_of(u);
    if (tweets.empty()) continue;
    Vector mean(vecs.vectors.cols(), 0.0);
    for (const auto* t : tweets) {
      auto row = vecs.vectors.row(ws.domain_row.at(t->id));
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += row[d];
    }
    for (auto& x : mean) x /= static_cast<double>(tweets.size());
    if (l2_norm(mean) > 0.0) normalize_in_place(mean);
    eligible.push_back(u);
    user_vectors.append_row(mean);
  }
  const std::size_t need = cfg.statement_users + cfg.profile_users;
  if (eligible.size() < need) {
    throw Error("insufficient users: the split needs " + std::to_string(need) + " sampled users with domain tweets, " +
                std::to_string(eligible.size()) + " available");
  }
  auto split =
      split_population(eligible, user_vectors, cfg.statement_users, cfg.profile_users, cfg.sample.seed, cfg.split_k_max);
  write_json(dir / "split.json", {{"statement_split", split.statement_split},
                                  {"profile_split", split.profile_split},
                                  {"clusters", split.clusters},
                                  {"sampled", sampled.size()},
                                  {"eligible", eligible.size()}});
  return {{"partition.json", "sampled_users.json", "split.json"},
          {std::to_string(partition.community_count()) + " communities, modularity " +
               std::to_string(partition.modularity),
           std::to_string(sampled.size()) + " users sampled, " + std::to_string(eligible.size()) + " with domain tweets"}};
}

StageResult run_pool(Workspace& ws, const fs::path& dir) {
  auto split = ws.split();
  std::vector<std::string> users;
  for (const char* key : {"statement_split", "profile_split"}) {
    for (const auto& u : split.at(key)) users.push_back(u.get<std::string>());
  }
  std::sort(users.begin(), users.end());
  const auto& domain = ws.domain_corpus();
  ws.domain_embedded();

  std::vector<EmbeddedSet> sets(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    std::vector<std::string> ids;
    for (const auto* t : domain.tweets_of(users[i])) ids.push_back(t->id);
    sets[i] = ws.subset(ids);
  }
  std::vector<UserPool> pools(users.size());
  detail::run_bounded(users.size(), worker_count(),
                      [&](std::size_t i) { pools[i] = assemble_pool(users[i], sets[i], ws.cfg.pooling); });
  write_pools_jsonl(dir / "pools.jsonl", pools);
  std::size_t largest = 0, total = 0;
  for (const auto& p : pools) {
    largest = std::max(largest, p.tweet_ids.size());
    total += p.tweet_ids.size();
  }
  write_json(dir / "summary.json", {{"users", pools.size()},
                                    {"largest_pool", largest},
                                    {"mean_pool", pools.empty() ? 0.0 : double(total) / double(pools.size())},
                                    {"n_select", ws.cfg.pooling.n_select},
                                    {"thresholds",
                                     {{"initial", ws.cfg.pooling.initial_threshold},
                                      {"decay_alpha", ws.cfg.pooling.decay_alpha},
                                      {"floor", ws.cfg.pooling.decay_floor}}}});
  return {{"pools.jsonl", "summary.json"},
          {std::to_string(pools.size()) + " pools, largest " + std::to_string(largest) + " tweets"}};
}

StageResult run_statements(Workspace& ws, const fs::path& dir) {
  const auto& cfg = ws.cfg;
  auto all_pools = ws.pools();
  std::vector<UserPool> pools;
  const auto split = ws.split();
  for (const auto& u : split.at("statement_split")) pools.push_back(all_pools.at(u.get<std::string>()));
  GatewayStack gw(cfg, dir / "audit.jsonl");
  auto gen = generate_statements(pools, ws.text_of(), cfg.prompt("generate_statements"), gw.get(),
                                 cfg.statement_batch_size, cfg.statement_max_batches);
  write_statements_json(dir / "raw.json", gen.statements);
  std::vector<StanceStatement> deduped;
  if (!gen.statements.empty()) deduped = dedup_statements(gen.statements, ws.embed(), cfg.dedup_threshold);
  write_statements_json(dir / "deduped.json", deduped);

  std::vector<StanceStatement> curated;
  if (!cfg.statement_selection.empty()) {
    try {
      curated = curate_statements(deduped, cfg.statement_selection);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config /statements/selection: ") + e.what());
    }
  } else {
    curated = read_statements_json(*cfg.curated_statements);
    for (auto& s : curated) s.source = StatementSource::curated;
  }
  if (curated.size() != cfg.statement_count) {
    throw ConfigError("curated statement set has " + std::to_string(curated.size()) + " statements, config expects " +
                      std::to_string(cfg.statement_count));
  }
  write_statements_json(dir / "statements.json", curated);
  write_json(dir / "summary.json", {{"calls", gen.calls},
                                    {"raw", gen.statements.size()},
                                    {"deduped", deduped.size()},
                                    {"curated", curated.size()},
                                    {"warnings", gen.warnings}});
  StageResult r{{"raw.json", "deduped.json", "statements.json", "summary.json"},
                {std::to_string(gen.statements.size()) + " raw, " + std::to_string(deduped.size()) + " after dedup, " +
                 std::to_string(curated.size()) + " curated"}};
  for (const auto& w : gen.warnings) r.notes.push_back("warning: " + w);
  return r;
}

StageResult run_profile(Workspace& ws, const fs::path& dir) {
  const auto& cfg = ws.cfg;
  auto users = ws.profile_users();
  auto pools = ws.pools();
  auto statements = ws.statements();
  auto text_of = ws.text_of();
  auto profile_tpl = cfg.prompt("profile");
  auto whole_tpl = cfg.prompt("amazon_summary");
  auto rag_tpl = cfg.prompt("amazon_rag");
  GatewayStack gw(cfg, dir / "audit.jsonl");

  std::vector<std::string> st_texts;
  for (const auto& s : statements) st_texts.push_back(s.text);
  Matrix st_vecs = ws.embed().embed_batch(st_texts);
  ws.domain_embedded();
  std::vector<EmbeddedSet> pool_sets;
  for (const auto& u : users) pool_sets.push_back(ws.subset(pools.at(u).tweet_ids));

  std::vector<ProfileResult> profiles(users.size());
  std::vector<UserProfile> whole(users.size()), rag(users.size());
  detail::run_bounded(users.size(), cfg.remote.max_in_flight, [&](std::size_t i) {
    const auto& pool = pools.at(users[i]);
    profiles[i] = profile_user(pool, text_of, statements, profile_tpl, gw.get());
    whole[i] = amazon_whole_history(pool, text_of, statements, whole_tpl, gw.get());
    rag[i] = amazon_rag(pool, text_of, pool_sets[i], statements, st_vecs, cfg.amazon_rag_top_j, rag_tpl, gw.get());
  });

  GroundednessReport grounded;
  std::vector<UserProfile> out;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto& pool = pools.at(users[i]);
    std::unordered_set<std::string> ids(pool.tweet_ids.begin(), pool.tweet_ids.end());
    for (const auto& [sid, cited] : profiles[i].profile.extractive) {
      for (const auto& c : cited) {
        if (!ids.count(c)) throw std::logic_error("extractive citation " + c + " escaped the pool of " + users[i]);
      }
    }
    grounded.merge(profiles[i].groundedness);
    out.push_back(std::move(profiles[i].profile));
  }
  write_profiles_jsonl(dir / "profiles.jsonl", out);
  write_profiles_jsonl(dir / "amazon_whole.jsonl", whole);
  write_profiles_jsonl(dir / "amazon_rag.jsonl", rag);
  write_file_atomic(dir / "groundedness.json", grounded.to_json() + "\n");
  return {{"profiles.jsonl", "amazon_whole.jsonl", "amazon_rag.jsonl", "groundedness.json"},
          {std::to_string(out.size()) + " users profiled on " + std::to_string(statements.size()) + " statements",
           std::to_string(grounded.violations.size()) + " groundedness violations dropped"}};
}

std::string abstractive_context(const UserProfile& p, const std::vector<StanceStatement>& statements) {
  std::string ctx;
  std::set<std::string> seen;
  for (const auto& s : statements) {
    auto it = p.abstractive.find(s.id);
    if (it == p.abstractive.end() || it->second.status != EntryStatus::ok) continue;
    if (!seen.insert(it->second.summary).second) continue;
    ctx += "- " + it->second.summary + "\n";
  }
  return ctx;
}

StageResult run_evaluate(Workspace& ws, const fs::path& dir) {
  const auto& cfg = ws.cfg;
  auto gold = read_gold_jsonl(*cfg.gold);
  auto users = ws.profile_users();
  auto statements = ws.statements();
  std::vector<PairKey> pairs;
  std::vector<PairKey> missing;
  for (const auto& u : users) {
    for (const auto& s : statements) {
      pairs.emplace_back(u, s.id);
      if (!gold.count(pairs.back())) missing.push_back(pairs.back());
    }
  }
  if (!missing.empty()) {
    throw ConfigError("gold labels miss " + std::to_string(missing.size()) + " of " + std::to_string(pairs.size()) +
                      " evaluation pairs, first " + missing.front().first + "/" + missing.front().second);
  }

  auto pools = ws.pools();
  auto text_of = ws.text_of();
  std::map<std::string, UserProfile> profiles, whole, rag;
  for (auto& p : read_profiles_jsonl(ws.dir(Stage::profile) / "profiles.jsonl")) profiles.emplace(p.user_id, p);
  for (auto& p : read_profiles_jsonl(ws.dir(Stage::profile) / "amazon_whole.jsonl")) whole.emplace(p.user_id, p);
  for (auto& p : read_profiles_jsonl(ws.dir(Stage::profile) / "amazon_rag.jsonl")) rag.emplace(p.user_id, p);

  std::map<std::string, AspectSpec> aspects;
  if (cfg.aspects) {
    for (auto& a : read_aspects(*cfg.aspects)) aspects.emplace(a.statement_id, a);
  }
  std::vector<std::string> st_texts;
  for (const auto& s : statements) st_texts.push_back(s.text);
  Matrix st_vecs = ws.embed().embed_batch(st_texts);

  bool uses = [&] {
    return std::find(cfg.methods.begin(), cfg.methods.end(), "random_history") != cfg.methods.end();
  }();
  std::optional<Corpus> history;
  if (uses) history = Corpus::ingest(ws.dir(Stage::ingest) / "corpus.jsonl", CorpusFormat::json_lines);
  ws.domain_embedded();

  // Context per (method, user).
  const std::size_t per_user = statements.size();
  std::map<std::pair<std::string, std::string>, std::string> contexts;
  for (const auto& u : users) {
    const auto& pool = pools.at(u);
    EmbeddedSet pool_set = ws.subset(pool.tweet_ids);
    std::vector<std::string> pool_texts;
    std::vector<std::pair<std::string, std::string>> docs;
    for (const auto& id : pool.tweet_ids) {
      pool_texts.push_back(text_of(id));
      docs.emplace_back(id, pool_texts.back());
    }
    for (const auto& m : cfg.methods) {
      std::vector<std::string> ids;
      auto add = [&](const std::string& id) {
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
      };
      std::string ctx;
      if (m == "extractive") {
        for (const auto& s : statements) {
          for (const auto& id : profiles.at(u).extractive.at(s.id)) add(id);
        }
      } else if (m == "abstractive") {
        ctx = abstractive_context(profiles.at(u), statements);
      } else if (m == "amazon_whole") {
        ctx = abstractive_context(whole.at(u), statements);
      } else if (m == "amazon_rag") {
        ctx = abstractive_context(rag.at(u), statements);
      } else if (m == "pool") {
        ids = pool.tweet_ids;
      } else if (m == "random") {
        ids = pool_random(pool.tweet_ids, per_user, user_seed(cfg.evaluation_seed, u));
      } else if (m == "random_history") {
        std::vector<std::string> all;
        for (const auto* t : history->tweets_of(u)) all.push_back(t->id);
        ids = pool_random(all, per_user, user_seed(cfg.evaluation_seed, u));
        for (const auto& id : ids) ctx += "[T" + id + "] " + history->find(id)->text + "\n";
      } else if (m == "bm25") {
        auto index = Bm25Index::build(docs);
        for (const auto& s : statements) {
          auto top = index.rank(s.text, 1);
          if (!top.empty()) add(top.front().id);
        }
      } else if (m == "dense") {
        auto index = VectorIndex::build(pool_set.ids, pool_set.vectors);
        for (std::size_t i = 0; i < statements.size(); ++i) {
          auto top = dense_rank(index, st_vecs.row(i), 1);
          if (!top.empty()) add(top.front().id);
        }
      } else if (m == "semae") {
        for (const auto& s : statements) {
          AspectSpec spec;
          if (auto it = aspects.find(s.id); it != aspects.end()) {
            spec = it->second;
          } else {
            spec.statement_id = s.id;
            for (auto& tok : text::word_tokens(s.text)) {
              if (text::codepoint_length(tok) > 3) spec.keywords.push_back(std::move(tok));
            }
          }
          if (spec.keywords.empty()) continue;
          auto sel = semae_select(pool_set, pool_texts, spec, 1);
          if (!sel.ids.empty()) add(sel.ids.front());
        }
      }
      if (m != "random_history" && ctx.empty() && !ids.empty()) ctx = format_tweets(ids, text_of);
      contexts[{m, u}] = std::move(ctx);
    }
  }

  struct Job {
    std::string method;
    std::size_t user;
    std::size_t statement;
  };
  std::vector<Job> jobs;
  for (const auto& m : cfg.methods) {
    for (std::size_t u = 0; u < users.size(); ++u) {
      for (std::size_t s = 0; s < statements.size(); ++s) jobs.push_back({m, u, s});
    }
  }
  GatewayStack gw(cfg, dir / "audit.jsonl");
  auto tpl = cfg.prompt("evaluate");
  std::vector<StanceDecision> decisions(jobs.size());
  std::vector<char> empty_context(jobs.size(), 0);
  detail::run_bounded(jobs.size(), cfg.remote.max_in_flight, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& ctx = contexts.at({job.method, users[job.user]});
    if (text::trim(ctx).empty()) {
      empty_context[i] = 1;
      return;
    }
    decisions[i] = detect_stance(ctx, statements[job.statement], tpl, gw.get());
  });

  std::vector<EvalResult> results;
  std::vector<std::pair<std::string, std::vector<EvalResult>>> by_method;
  json judge = json::object();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    EvalResult r{users[job.user], statements[job.statement].id, job.method, decisions[i].label,
                 gold.at({users[job.user], statements[job.statement].id})};
    if (by_method.empty() || by_method.back().first != job.method) by_method.push_back({job.method, {}});
    by_method.back().second.push_back(r);
    results.push_back(std::move(r));
    auto& j = judge[job.method];
    if (j.is_null()) j = {{"parse_warnings", 0}, {"transport_failures", 0}, {"empty_context", 0}};
    if (decisions[i].parse_warning) j["parse_warnings"] = j["parse_warnings"].get<int>() + 1;
    if (decisions[i].transport_failure) j["transport_failures"] = j["transport_failures"].get<int>() + 1;
    if (empty_context[i]) j["empty_context"] = j["empty_context"].get<int>() + 1;
  }
  auto report = compare_methods(by_method, cfg.evaluation_seed, cfg.bootstrap_resamples);
  write_results_jsonl(dir / "results.jsonl", results);
  write_file_atomic(dir / "report.json", report.to_json() + "\n");
  write_file_atomic(dir / "report.txt", report.to_text());
  write_json(dir / "judge.json", {{"pairs", pairs.size()}, {"methods", judge}});
  StageResult r{{"results.jsonl", "report.json", "report.txt", "judge.json"},
                {std::to_string(pairs.size()) + " pairs x " + std::to_string(cfg.methods.size()) + " methods"}};
  for (const auto& m : report.methods) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s macro-F1 %.4f [%.4f, %.4f]", m.method.c_str(), m.f1.point, m.f1.lower,
                  m.f1.upper);
    r.notes.push_back(buf);
  }
  return r;
}

StageResult run_report(Workspace& ws, const fs::path& dir) {
  auto ingest = read_json(ws.dir(Stage::ingest) / "summary.json");
  auto kb = read_json(ws.dir(Stage::kb) / "summary.json");
  auto filter = read_json(ws.dir(Stage::filter) / "summary.json");
  auto split = ws.split();
  auto pool = read_json(ws.dir(Stage::pool) / "summary.json");
  auto st = read_json(ws.dir(Stage::statements) / "summary.json");
  auto grounded = read_json(ws.dir(Stage::profile) / "groundedness.json");
  auto judge = read_json(ws.dir(Stage::evaluate) / "judge.json");
  std::ostringstream out;
  out << "Corpus: " << ingest["tweets"] << " tweets, " << ingest["users"] << " users, retweet graph "
      << ingest["graph_nodes"] << " nodes / " << ingest["graph_edges"] << " edges\n";
  out << "Knowledge base: " << read_file(ws.dir(Stage::kb) / "stats.txt");
  out << "Chunks: " << kb["chunks"] << "\n\n";
  out << "Distance labels: " << filter["eq1_domain"] << " domain, " << filter["eq1_non_domain"] << " non-domain, "
      << filter["eq1_borderline"] << " borderline\n";
  out << "Domain corpus: " << filter["domain_tweets"] << " tweets from " << filter["domain_users"] << " users\n";
  out << read_file(ws.dir(Stage::filter) / "distance_report.txt") << "\n";
  out << "Sampled users: " << split["sampled"] << " (" << split["eligible"] << " with domain tweets), split "
      << split["statement_split"].size() << " / " << split["profile_split"].size() << " over " << split["clusters"]
      << " clusters\n";
  out << "Pools: " << pool["users"] << " users, largest " << pool["largest_pool"] << " tweets\n";
  out << "Statements: " << st["raw"] << " raw, " << st["deduped"] << " after dedup, " << st["curated"]
      << " curated\n";
  out << "Groundedness: " << grounded["violation_count"] << " dropped citations, " << grounded["no_evidence_entries"]
      << " no-evidence entries, " << grounded["failed_entries"] << " failed entries\n";
  out << "Evaluation pairs: " << judge["pairs"] << "\n\n";
  out << read_file(ws.dir(Stage::evaluate) / "report.txt");
  write_file_atomic(dir / "report.txt", out.str());
  return {{"report.txt"}, {}};
}

StageResult run_body(Stage s, Workspace& ws, const fs::path& dir) {
  switch (s) {
    case Stage::ingest: return run_ingest(ws, dir);
    case Stage::kb: return run_kb(ws, dir);
    case Stage::filter: return run_filter(ws, dir);
    case Stage::sample: return run_sample(ws, dir);
    case Stage::pool: return run_pool(ws, dir);
    case Stage::statements: return run_statements(ws, dir);
    case Stage::profile: return run_profile(ws, dir);
    case Stage::evaluate: return run_evaluate(ws, dir);
    case Stage::report: return run_report(ws, dir);
    case Stage::serve_annotation: break;
  }
  throw InvalidArgument("stage has no artifacts");
}

std::map<std::string, fs::path> input_files(Stage s, const PipelineConfig& cfg) {
  std::map<std::string, fs::path> in;
  auto gateway_inputs = [&] {
    if (cfg.gateway_provider == "mock") in["mock_rules"] = *cfg.mock_rules;
    for (const auto& [name, file] : cfg.template_files) in["template:" + name] = file;
  };
  switch (s) {
    case Stage::ingest:
      in["corpus"] = cfg.corpus;
      in["graph"] = cfg.graph;
      break;
    case Stage::kb: in["kg_snapshot"] = cfg.kg_snapshot; break;
    case Stage::statements:
      gateway_inputs();
      if (cfg.statement_selection.empty()) in["curated_statements"] = *cfg.curated_statements;
      break;
    case Stage::profile: gateway_inputs(); break;
    case Stage::evaluate:
      gateway_inputs();
      if (!cfg.gold) throw ConfigError("config /paths/gold is required for evaluate");
      in["gold"] = *cfg.gold;
      if (cfg.aspects) in["aspects"] = *cfg.aspects;
      break;
    default: break;
  }
  return in;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) {}

fs::path Pipeline::stage_dir(Stage s) const { return cfg_.output_dir / to_string(s); }

StageOutcome Pipeline::run(Stage stage, bool force) {
  if (stage == Stage::serve_annotation) {
    serve_annotation();
    return {stage, false, {}};
  }
  for (Stage up : direct_inputs(stage)) {
    if (!fs::exists(stage_dir(up) / "manifest.json")) throw UpstreamMissing(to_string(up));
  }
  auto inputs = input_files(stage, cfg_);
  json expected = {{"stage", to_string(stage)},
                   {"version", kVersion},
                   {"config_sha256", cfg_.stage_hash(stage)},
                   {"inputs", json::object()},
                   {"upstream", json::object()}};
  for (const auto& [name, path] : inputs) {
    if (!fs::exists(path)) throw ConfigError("input file " + path.string() + " (" + name + ") does not exist");
    expected["inputs"][name] = sha256_file(path);
  }
  for (Stage up : direct_inputs(stage)) {
    expected["upstream"][to_string(up)] = sha256_file(stage_dir(up) / "manifest.json");
  }

  const fs::path dir = stage_dir(stage);
  const fs::path manifest_path = dir / "manifest.json";
  if (!force && fs::exists(manifest_path)) {
    try {
      json old = read_json(manifest_path);
      json outputs = old.at("outputs");
      old.erase("outputs");
      bool intact = old == expected;
      for (const auto& [file, hash] : outputs.items()) {
        if (!intact) break;
        intact = fs::exists(dir / file) && sha256_file(dir / file) == hash.get<std::string>();
      }
      if (intact) {
        log_ << to_string(stage) << ": skipped (up to date)\n";
        return {stage, true, {}};
      }
    } catch (const json::exception&) {
      // An unreadable manifest means the stage runs again.
    }
  }

  fs::remove_all(dir);
  fs::create_directories(dir);
  Workspace ws{cfg_, cfg_.output_dir, {}, {}, {}, {}};
  StageResult result = run_body(stage, ws, dir);
  json manifest = expected;
  manifest["outputs"] = json::object();
  for (const auto& file : result.outputs) manifest["outputs"][file] = sha256_file(dir / file);
  write_json(manifest_path, manifest);
  log_ << to_string(stage) << ": done\n";
  for (const auto& n : result.notes) log_ << "  " << n << "\n";
  return {stage, false, result.notes};
}

std::vector<StageOutcome> Pipeline::run_all(bool force) {
  std::vector<StageOutcome> out;
  for (Stage s : artifact_stages()) out.push_back(run(s, force));
  return out;
}

void Pipeline::serve_annotation() {
  for (Stage up : direct_inputs(Stage::serve_annotation)) {
    if (!fs::exists(stage_dir(up) / "manifest.json")) throw UpstreamMissing(to_string(up));
  }
  if (!cfg_.annotation_tokens) throw ConfigError("config /annotation/tokens is required to serve annotation");
  if (!fs::exists(*cfg_.annotation_tokens)) {
    throw ConfigError("token file " + cfg_.annotation_tokens->string() + " does not exist");
  }
  Workspace ws{cfg_, cfg_.output_dir, {}, {}, {}, {}};
  AnnotationStore store(cfg_.output_dir / "annotation", {}, cfg_.daily_cap);
  if (store.progress().pairs == 0) {
    auto pools = ws.pools();
    auto statements = ws.statements();
    const auto& domain = ws.domain_corpus();
    std::vector<PairKey> pairs;
    std::map<std::string, std::vector<PoolTweet>> pool_tweets;
    for (const auto& u : ws.profile_users()) {
      auto& list = pool_tweets[u];
      for (const auto& id : pools.at(u).tweet_ids) {
        const Tweet* t = domain.find(id);
        list.push_back({t->id, t->text, t->created_at});
      }
      for (const auto& s : statements) pairs.emplace_back(u, s.id);
    }
    auto ids = store.create_batch(pairs, pool_tweets, statements, cfg_.annotators);
    log_ << "serve-annotation: created " << ids.size() << " tasks for " << pairs.size() << " pairs\n";
  }
  AnnotationServerConfig sc;
  sc.host = cfg_.annotation_host;
  sc.port = cfg_.annotation_port;
  sc.tokens = read_annotator_tokens(*cfg_.annotation_tokens);
  sc.static_dir = cfg_.annotation_ui;
  AnnotationServer server(store, sc);
  log_ << "serve-annotation: listening on http://" << sc.host << ":" << sc.port << "\n";
  log_.flush();
  server.run();
}

}  // namespace userprof
