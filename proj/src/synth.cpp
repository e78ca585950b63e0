#include "userprof/synth.hpp"


#include <json.hpp>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/profiling.hpp"

namespace userprof::synth {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& flavor_vocabulary() {
  static const std::vector<std::string> words = {
      "northbound", "southbound", "morning", "evening", "weekday", "weekend", "delayed", "express",
      "crowded",    "quiet",      "rainy",   "sunny",   "downtown", "suburb", "airport", "harbor",
      "stadium",    "campus",     "market",  "bridge",  "tunnel",   "night",  "holiday", "detour"};
  return words;
}

std::string pick(Rng& rng, const std::vector<std::string>& words) { return words[rng.uniform_index(words.size())]; }

Timestamp kEpoch = 1704067200;  // 2024-01-01T00:00:00Z

struct Writer {
  std::vector<Tweet> tweets;
  std::size_t next_id = 1000000;
  Timestamp clock = kEpoch;

  std::string add(const std::string& user, std::string text) {
    std::string id = std::to_string(next_id++);
    clock += 97;
    tweets.push_back({id, user, std::move(text), clock, 0, 0});
    return id;
  }
};

void write_lines(const fs::path& path, const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  write_file_atomic(path, out);
}

void write_corpus(const fs::path& path, const std::vector<Tweet>& tweets) {
  std::vector<json> rows;
  rows.reserve(tweets.size());
  for (const auto& t : tweets) {
    rows.push_back({{"id", t.id}, {"user_id", t.user_id}, {"text", t.text}, {"created_at", format_iso8601(t.created_at)}});
  }
  write_lines(path, rows);
}

void write_star_graph(std::vector<json>& rows, const std::vector<std::string>& members, Rng& rng) {
  for (std::size_t i = 1; i < members.size(); ++i) {
    rows.push_back({{"source", members[i]}, {"target", members[0]}, {"weight", 1 + rng.uniform_index(3)}});
  }
}

void write_kg(const fs::path& path, Rng& rng) {
  std::vector<json> rows;
  for (int e = 0; e < 40; ++e) {
    char id[8];
    std::snprintf(id, sizeof id, "E%02d", e);
    json node = {{"entity_id", id}, {"label", std::string("Entity ") + id}};
    std::string doc = std::string("# ") + id + "\n\n";
    if (e < 36) {
      for (int p = 0; p < 3; ++p) doc += chunk_text(rng) + "\n\n";
    } else {
      for (int p = 0; p < 3; ++p) doc += off_topic_text(rng) + "\n\n";
    }
    if (e % 9 != 8) node["document"] = doc;
    rows.push_back(node);
  }
  for (int e = 1; e < 40; ++e) {
    char id[8];
    std::snprintf(id, sizeof id, "E%02d", e);
    rows.push_back({{"source", id}, {"edge_type", e < 36 ? "related_to" : "mentioned_with"}, {"target", "E00"}});
  }
  write_lines(path, rows);
}

std::vector<StanceStatement> curated_statements() {
  static const char* topics[] = {"a fare freeze",          "late night service", "the new tram line",
                                 "station renovations",     "bus lane expansion", "contactless payment",
                                 "weekend maintenance",     "platform screen doors", "free transfers",
                                 "a congestion charge",     "bike racks on buses", "airport rail link",
                                 "driverless trains",       "depot relocation",   "peak hour pricing"};
  std::vector<StanceStatement> out;
  for (int s = 0; s < 15; ++s) {
    char id[8];
    std::snprintf(id, sizeof id, "S%02d", s + 1);
    out.push_back({id, std::string("The user supports ") + topics[s] + ".", StatementSource::curated});
  }
  return out;
}

std::string generation_response() {
  return "The user wants more frequent trains.\n"
         "- The user complains about fare increases.\n"
         "The user prefers buses over trams.\n"
         "The user wants more frequent trains.\n"
         "2. The user supports station renovations.\n";
}

json base_config() {
  return {{"output_dir", "out"},
          {"paths", {{"corpus", "corpus.jsonl"}, {"graph", "graph.jsonl"}, {"kg_snapshot", "kg.jsonl"},
                     {"gold", "gold.jsonl"}}},
          {"kb", {{"seeds", {"E00"}}, {"edge_types", {"related_to"}}, {"depth", 1}}},
          {"statements", {{"curated_file", "statements.json"}}},
          {"gateway", {{"provider", "mock"}, {"rules", "mock_rules.json"}}},
          {"annotation", {{"tokens", "tokens.json"}, {"port", 0}, {"annotators", {"ann-a", "ann-b"}}}}};
}

void write_tokens(const fs::path& path) {
  json tokens = {{"token-a", {{"id", "ann-a"}, {"role", "primary"}}},
                 {"token-b", {{"id", "ann-b"}, {"role", "primary"}}},
                 {"token-c", {{"id", "ann-c"}, {"role", "adjudicator"}}}};
  write_file_atomic(path, tokens.dump(1) + "\n");
}

void write_rules(const fs::path& path, const std::vector<MockRule>& rules) { write_mock_rules(path, rules); }

}  // namespace

const std::vector<std::string>& domain_vocabulary() {
  static const std::vector<std::string> words = {"transit", "railway", "commuter", "timetable", "station", "subway",
                                                 "bus",     "fare",    "platform", "tram",      "depot",   "ridership"};
  return words;
}

const std::vector<std::string>& off_topic_vocabulary() {
  static const std::vector<std::string> words = {
      "recipe", "garlic",  "oven",    "basil",   "tomato", "garden", "compost", "tulip",  "pottery", "knitting",
      "guitar", "concert", "novel",   "poetry",  "puppy",  "kitten", "yoga",    "tennis", "museum",  "painting",
      "cheese", "bakery",  "sourdough", "pepper", "lemon", "violin", "chess",   "hiking", "canoe",   "orchid"};
  return words;
}

std::string domain_text(const std::vector<std::string>& extra) {
  std::string out;
  for (const auto& w : domain_vocabulary()) out += (out.empty() ? "" : " ") + w;
  for (const auto& w : extra) out += " " + w;
  return out;
}

std::string off_topic_text(Rng& rng) {
  std::size_t n = 8 + rng.uniform_index(7);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + pick(rng, off_topic_vocabulary());
  return out;
}

std::string chunk_text(Rng& rng) {
  std::vector<std::string> words;
  for (const auto& w : domain_vocabulary()) {
    std::size_t reps = 1 + rng.uniform_index(3);
    for (std::size_t r = 0; r < reps; ++r) words.push_back(w);
  }
  rng.shuffle(words);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::vector<std::string> tweet_texts(std::size_t n, double domain_share, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform01() < domain_share) {
      out.push_back(domain_text({pick(rng, flavor_vocabulary()), pick(rng, flavor_vocabulary())}));
    } else {
      out.push_back(off_topic_text(rng));
    }
  }
  return out;
}

FixtureSummary write_e2e_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(123);
  Writer w;
  const auto statements = curated_statements();
  std::vector<std::string> users;
  for (int u = 1; u <= 25; ++u) {
    char id[8];
    std::snprintf(id, sizeof id, "u%02d", u);
    users.push_back(id);
  }

  std::vector<json> gold_rows;
  std::vector<MockRule> rules;
  for (const auto& user : users) {
    for (const auto& s : statements) {
      double draw = rng.uniform01();
      StanceLabel label = draw < 0.4 ? StanceLabel::True : draw < 0.7 ? StanceLabel::False : StanceLabel::CannotAnswer;
      gold_rows.push_back({{"user_id", user}, {"statement_id", s.id}, {"label", to_string(label)}});
      std::string pattern = "User: " + user + "\nStatement ID: " + s.id + "\n";
      if (label == StanceLabel::CannotAnswer) {
        rules.push_back({pattern, std::string(kNoEvidence)});
        continue;
      }
      std::string sid = s.id;
      for (auto& c : sid) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      const char* verb = label == StanceLabel::True ? "endorse" : "reject";
      std::string tid = w.add(user, domain_text({user, std::string(verb) + "-" + sid, pick(rng, flavor_vocabulary())}));
      rules.push_back({pattern, std::string("The user ") + verb + "s this [T" + tid + "]."});
    }
    for (int f = 0; f < 3; ++f) w.add(user, domain_text({user, pick(rng, flavor_vocabulary())}));
    for (int f = 0; f < 5; ++f) w.add(user, off_topic_text(rng));
  }
  for (const auto& s : statements) {
    std::string sid = s.id;
    for (auto& c : sid) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    rules.push_back({"(?s)Claim ID: " + s.id + "\n.*endorse-" + sid, "True"});
    rules.push_back({"(?s)Claim ID: " + s.id + "\n.*reject-" + sid, "False"});
  }
  rules.push_back({"Claim ID: S[0-9]+\n", "Cannot be answered"});
  rules.push_back({"stance claims", generation_response()});
  rules.push_back({"(?s).*", "The user writes about public transit."});

  Rng graph_rng(7);
  std::vector<json> graph;
  write_star_graph(graph, users, graph_rng);

  write_corpus(dir / "corpus.jsonl", w.tweets);
  write_lines(dir / "graph.jsonl", graph);
  write_kg(dir / "kg.jsonl", rng);
  write_lines(dir / "gold.jsonl", gold_rows);
  write_statements_json(dir / "statements.json", statements);
  write_rules(dir / "mock_rules.json", rules);
  write_tokens(dir / "tokens.json");

  json cfg = base_config();
  cfg["sample"] = {{"top_community_fraction", 1.0}, {"user_fraction", 1.0}, {"statement_users", 5},
                   {"profile_users", 20}};
  write_file_atomic(dir / "pipeline.json", cfg.dump(1) + "\n");
  return {dir / "pipeline.json", users.size(), w.tweets.size(), statements.size()};
}

FixtureSummary write_default_shape_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(321);
  Writer w;
  const auto statements = curated_statements();
  std::vector<std::vector<std::string>> communities;
  std::size_t next_user = 0;
  auto make_community = [&](std::size_t size) {
    std::vector<std::string> members;
    for (std::size_t i = 0; i < size; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "p%04zu", next_user++);
      members.push_back(id);
    }
    communities.push_back(std::move(members));
  };
  make_community(800);
  make_community(800);
  for (int c = 0; c < 8; ++c) make_community(30);

  std::vector<json> gold_rows;
  std::vector<json> graph;
  for (std::size_t c = 0; c < communities.size(); ++c) {
    const bool top = c < 2;
    write_star_graph(graph, communities[c], rng);
    for (std::size_t i = 0; i < communities[c].size(); ++i) {
      const auto& user = communities[c][i];
      std::size_t domain = top ? (i % 4 == 0 ? 100 : 12) : 4;
      for (std::size_t t = 0; t < domain; ++t) {
        w.add(user, domain_text({pick(rng, flavor_vocabulary()), pick(rng, flavor_vocabulary())}));
      }
      for (int t = 0; t < 2; ++t) w.add(user, off_topic_text(rng));
      if (!top) continue;
      for (const auto& s : statements) {
        auto label = static_cast<StanceLabel>(rng.uniform_index(kStanceClasses));
        gold_rows.push_back({{"user_id", user}, {"statement_id", s.id}, {"label", to_string(label)}});
      }
    }
  }
  std::vector<MockRule> rules = {{"Statement ID: S[0-9]+\n", std::string(kNoEvidence)},
                                 {"Claim ID: S[0-9]+\n", "Cannot be answered"},
                                 {"stance claims", generation_response()},
                                 {"(?s).*", "The user writes about public transit."}};

  write_corpus(dir / "corpus.jsonl", w.tweets);
  write_lines(dir / "graph.jsonl", graph);
  write_kg(dir / "kg.jsonl", rng);
  write_lines(dir / "gold.jsonl", gold_rows);
  write_statements_json(dir / "statements.json", statements);
  write_rules(dir / "mock_rules.json", rules);
  write_tokens(dir / "tokens.json");
  json cfg = base_config();
  write_file_atomic(dir / "pipeline.json", cfg.dump(1) + "\n");
  return {dir / "pipeline.json", next_user, w.tweets.size(), statements.size()};
}

}  // namespace userprof::synth
