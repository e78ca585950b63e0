#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "userprof/digest.hpp"
#include "userprof/pipeline.hpp"

namespace userprof {

using json = nlohmann::json;

namespace {

constexpr const char* kDefaults = R"json({
  "output_dir": "out",
  "paths": {
    "corpus": "corpus.jsonl",
    "corpus_format": "json-lines",
    "graph": "graph.jsonl",
    "kg_snapshot": "kg.jsonl",
    "gold": null,
    "aspects": null
  },
  "embedder": {
    "provider": "hashing",
    "dim": 256,
    "endpoint": "",
    "model": "",
    "timeout_seconds": 30,
    "retries": 2,
    "batch_size": 64
  },
  "kb": {
    "seeds": [],
    "edge_types": [],
    "depth": 3,
    "chunk_tokens": 256,
    "chunk_overlap": 32
  },
  "filter": {
    "theta": 0.7,
    "k": 10,
    "borderline_sample": 2000,
    "keyword_groups": [],
    "classifier": {
      "learning_rate": 0.5,
      "epochs": 200,
      "l2": 0.0001,
      "threshold": 0.5,
      "seed": 123
    }
  },
  "sample": {
    "top_community_fraction": 0.2,
    "user_fraction": 0.1,
    "resolution": 1.0,
    "seed": 123,
    "statement_users": 50,
    "profile_users": 100,
    "split_k_max": 10
  },
  "pooling": {
    "n_select": 20,
    "initial_threshold": 0.9,
    "decay_alpha": 0.02,
    "decay_floor": 0.5,
    "k_max": 10,
    "seed": 123
  },
  "statements": {
    "batch_size": 25,
    "max_batches": 0,
    "dedup_threshold": 0.85,
    "count": 15,
    "selection": [],
    "curated_file": null
  },
  "gateway": {
    "provider": "mock",
    "rules": null,
    "endpoint": "",
    "model": "",
    "api_key_env": "",
    "timeout_seconds": 60,
    "retries": 2,
    "max_in_flight": 4,
    "temperature": 0.0,
    "top_p": 1.0,
    "max_tokens": 1024
  },
  "templates": {},
  "profile": {
    "amazon_rag_top_j": 5
  },
  "evaluate": {
    "methods": ["extractive", "abstractive", "pool", "random", "random_history",
                "bm25", "dense", "semae", "amazon_whole", "amazon_rag"],
    "bootstrap_resamples": 10000,
    "seed": 123
  },
  "annotation": {
    "host": "127.0.0.1",
    "port": 8080,
    "tokens": null,
    "ui_dir": null,
    "annotators": ["annotator-1", "annotator-2"],
    "daily_cap": 300
  }
})json";

// Objects whose keys are free-form.
bool open_object(const std::string& path) { return path == "/templates"; }

void merge(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) throw ConfigError("config" + path + " must be an object");
  for (const auto& [key, value] : over.items()) {
    std::string sub = path + "/" + key;
    if (!base.contains(key)) {
      if (open_object(path)) {
        base[key] = value;
        continue;
      }
      throw ConfigError("unknown config key " + sub);
    }
    if (base[key].is_object() && !open_object(sub)) {
      merge(base[key], value, sub);
    } else {
      base[key] = value;
    }
  }
}

template <class T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config /") + section + "/" + key + ": " + e.what());
  }
}

std::optional<std::filesystem::path> opt_path(const json& j, const char* section, const char* key,
                                              const std::filesystem::path& base) {
  const auto& v = j.at(section).at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw ConfigError(std::string("config /") + section + "/" + key + " must be a path or null");
  auto s = v.get<std::string>();
  if (s.empty()) return std::nullopt;
  return base / s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string default_config_json() { return json::parse(kDefaults).dump(2) + "\n"; }

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto base = std::filesystem::absolute(path).parent_path();
  return from_json(j, base);
}

PipelineConfig PipelineConfig::from_json(const json& user, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  c.effective = json::parse(kDefaults);
  merge(c.effective, user, "");
  c.base_dir = base_dir;
  const json& j = c.effective;

  try {
    c.output_dir = base_dir / j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config /output_dir: ") + e.what());
  }
  c.corpus = base_dir / get<std::string>(j, "paths", "corpus");
  try {
    c.corpus_format = parse_corpus_format(get<std::string>(j, "paths", "corpus_format"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  c.graph = base_dir / get<std::string>(j, "paths", "graph");
  c.kg_snapshot = base_dir / get<std::string>(j, "paths", "kg_snapshot");
  c.gold = opt_path(j, "paths", "gold", base_dir);
  c.aspects = opt_path(j, "paths", "aspects", base_dir);

  auto provider = get<std::string>(j, "embedder", "provider");
  require(provider == "hashing" || provider == "remote", "config /embedder/provider must be hashing or remote");
  c.embedder.provider = provider == "remote" ? EmbedderProvider::remote : EmbedderProvider::hashing;
  c.embedder.dim = get<std::size_t>(j, "embedder", "dim");
  c.embedder.endpoint = get<std::string>(j, "embedder", "endpoint");
  c.embedder.model_name = get<std::string>(j, "embedder", "model");
  c.embedder.timeout_seconds = get<double>(j, "embedder", "timeout_seconds");
  c.embedder.retries = get<int>(j, "embedder", "retries");
  c.embedder.batch_size = get<std::size_t>(j, "embedder", "batch_size");

  c.kb_seeds = get<std::vector<std::string>>(j, "kb", "seeds");
  auto types = get<std::vector<std::string>>(j, "kb", "edge_types");
  c.kb_edge_types = {types.begin(), types.end()};
  c.kb_depth = get<unsigned>(j, "kb", "depth");
  c.chunk_tokens = get<std::size_t>(j, "kb", "chunk_tokens");
  c.chunk_overlap = get<std::size_t>(j, "kb", "chunk_overlap");

  c.filter.theta = get<double>(j, "filter", "theta");
  c.filter.k = get<std::size_t>(j, "filter", "k");
  c.borderline_sample = get<std::size_t>(j, "filter", "borderline_sample");
  try {
    for (const auto& g : j.at("filter").at("keyword_groups")) {
      c.keyword_groups.push_back({g.at("name").get<std::string>(), g.at("keywords").get<std::vector<std::string>>()});
    }
    const auto& cl = j.at("filter").at("classifier");
    c.classifier.learning_rate = cl.at("learning_rate").get<double>();
    c.classifier.epochs = cl.at("epochs").get<std::size_t>();
    c.classifier.l2 = cl.at("l2").get<double>();
    c.classifier.threshold = cl.at("threshold").get<double>();
    c.classifier.seed = cl.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config /filter: ") + e.what());
  }

  c.sample.top_community_fraction = get<double>(j, "sample", "top_community_fraction");
  c.sample.user_fraction = get<double>(j, "sample", "user_fraction");
  c.sample.seed = get<std::uint64_t>(j, "sample", "seed");
  c.resolution = get<double>(j, "sample", "resolution");
  c.statement_users = get<std::size_t>(j, "sample", "statement_users");
  c.profile_users = get<std::size_t>(j, "sample", "profile_users");
  c.split_k_max = get<std::size_t>(j, "sample", "split_k_max");

  c.pooling.n_select = get<std::size_t>(j, "pooling", "n_select");
  c.pooling.initial_threshold = get<double>(j, "pooling", "initial_threshold");
  c.pooling.decay_alpha = get<double>(j, "pooling", "decay_alpha");
  c.pooling.decay_floor = get<double>(j, "pooling", "decay_floor");
  c.pooling.k_max = get<std::size_t>(j, "pooling", "k_max");
  c.pooling.seed = get<std::uint64_t>(j, "pooling", "seed");

  c.statement_batch_size = get<std::size_t>(j, "statements", "batch_size");
  c.statement_max_batches = get<std::size_t>(j, "statements", "max_batches");
  c.dedup_threshold = get<double>(j, "statements", "dedup_threshold");
  c.statement_count = get<std::size_t>(j, "statements", "count");
  c.statement_selection = get<std::vector<std::string>>(j, "statements", "selection");
  c.curated_statements = opt_path(j, "statements", "curated_file", base_dir);

  c.gateway_provider = get<std::string>(j, "gateway", "provider");
  c.mock_rules = opt_path(j, "gateway", "rules", base_dir);
  c.remote.endpoint = get<std::string>(j, "gateway", "endpoint");
  c.remote.model = get<std::string>(j, "gateway", "model");
  c.remote.timeout_seconds = get<double>(j, "gateway", "timeout_seconds");
  c.remote.retries = get<int>(j, "gateway", "retries");
  c.remote.max_in_flight = get<std::size_t>(j, "gateway", "max_in_flight");
  auto key_env = get<std::string>(j, "gateway", "api_key_env");
  if (!key_env.empty()) {
    if (const char* key = std::getenv(key_env.c_str())) c.remote.api_key = key;
  }
  c.temperature = get<double>(j, "gateway", "temperature");
  c.top_p = get<double>(j, "gateway", "top_p");
  c.max_tokens = get<int>(j, "gateway", "max_tokens");
  for (const auto& [name, file] : j.at("templates").items()) {
    require(file.is_string(), "config /templates/" + name + " must be a path");
    c.template_files[name] = base_dir / file.get<std::string>();
  }

  c.amazon_rag_top_j = get<std::size_t>(j, "profile", "amazon_rag_top_j");

  c.methods = get<std::vector<std::string>>(j, "evaluate", "methods");
  c.bootstrap_resamples = get<std::size_t>(j, "evaluate", "bootstrap_resamples");
  c.evaluation_seed = get<std::uint64_t>(j, "evaluate", "seed");

  c.annotation_host = get<std::string>(j, "annotation", "host");
  c.annotation_port = get<int>(j, "annotation", "port");
  c.annotation_tokens = opt_path(j, "annotation", "tokens", base_dir);
  c.annotation_ui = opt_path(j, "annotation", "ui_dir", base_dir);
  auto ann = get<std::vector<std::string>>(j, "annotation", "annotators");
  require(ann.size() == 2 && ann[0] != ann[1], "config /annotation/annotators must name two distinct annotators");
  c.annotators = {ann[0], ann[1]};
  c.daily_cap = get<std::size_t>(j, "annotation", "daily_cap");

  try {
    c.embedder.validate();
    c.filter.validate();
    c.sample.validate();
    c.pooling.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  require(c.chunk_tokens > 0 && c.chunk_overlap < c.chunk_tokens,
          "config /kb: chunk_overlap must be smaller than chunk_tokens");
  require(c.borderline_sample > 0, "config /filter/borderline_sample must be positive");
  require(c.resolution > 0.0, "config /sample/resolution must be positive");
  require(c.statement_users > 0 && c.profile_users > 0, "config /sample: split sizes must be positive");
  require(c.split_k_max > 0, "config /sample/split_k_max must be positive");
  require(c.statement_batch_size > 0, "config /statements/batch_size must be positive");
  require(c.dedup_threshold > 0.0 && c.dedup_threshold < 1.0, "config /statements/dedup_threshold must be in (0, 1)");
  require(c.statement_count > 0, "config /statements/count must be positive");
  require(!c.statement_selection.empty() || c.curated_statements.has_value(),
          "config /statements needs a selection or a curated_file");
  require(c.statement_selection.empty() || c.statement_selection.size() == c.statement_count,
          "config /statements/selection must list exactly count ids");
  require(c.gateway_provider == "mock" || c.gateway_provider == "remote",
          "config /gateway/provider must be mock or remote");
  require(c.gateway_provider != "mock" || c.mock_rules.has_value(), "config /gateway/rules is required for mock");
  require(c.gateway_provider != "remote" || !c.remote.endpoint.empty(),
          "config /gateway/endpoint is required for remote");
  require(c.remote.max_in_flight > 0 && c.remote.max_in_flight <= 1024,
          "config /gateway/max_in_flight must be in [1, 1024]");
  require(c.temperature >= 0.0, "config /gateway/temperature must be >= 0");
  require(c.max_tokens > 0, "config /gateway/max_tokens must be positive");
  for (const auto& [name, file] : c.template_files) {
    bool known = name == "profile" || name == "evaluate" || name == "generate_statements" ||
                 name == "amazon_summary" || name == "amazon_rag";
    require(known, "config /templates/" + name + " is not a known template");
  }
  require(c.amazon_rag_top_j > 0, "config /profile/amazon_rag_top_j must be positive");
  require(!c.methods.empty(), "config /evaluate/methods is empty");
  std::set<std::string> seen;
  for (const auto& m : c.methods) {
    require(std::find(kEvaluationMethods.begin(), kEvaluationMethods.end(), m) != kEvaluationMethods.end(),
            "config /evaluate/methods: unknown method " + m);
    require(seen.insert(m).second, "config /evaluate/methods lists " + m + " twice");
  }
  require(c.bootstrap_resamples > 0, "config /evaluate/bootstrap_resamples must be positive");
  require(c.annotation_port >= 0 && c.annotation_port < 65536, "config /annotation/port is out of range");
  require(c.daily_cap > 0, "config /annotation/daily_cap must be positive");
  return c;
}

std::string PipelineConfig::stage_hash(Stage s) const {
  std::vector<const char*> sections;
  switch (s) {
    case Stage::ingest: sections = {}; break;
    case Stage::kb: sections = {"kb", "embedder"}; break;
    case Stage::filter: sections = {"filter", "embedder"}; break;
    case Stage::sample: sections = {"sample", "embedder"}; break;
    case Stage::pool: sections = {"pooling", "embedder"}; break;
    case Stage::statements: sections = {"statements", "gateway", "templates", "embedder"}; break;
    case Stage::profile: sections = {"profile", "gateway", "templates", "embedder"}; break;
    case Stage::evaluate: sections = {"evaluate", "gateway", "templates", "embedder"}; break;
    case Stage::serve_annotation: sections = {"annotation"}; break;
    case Stage::report: sections = {}; break;
  }
  json part = json::object();
  for (const char* name : sections) part[name] = effective.at(name);
  if (s == Stage::ingest) part["corpus_format"] = effective.at("paths").at("corpus_format");
  return sha256_hex(part.dump());
}

PromptTemplate PipelineConfig::prompt(const std::string& name) const {
  auto it = template_files.find(name);
  if (it == template_files.end()) return default_template(name);
  if (!std::filesystem::exists(it->second)) throw ConfigError("template file " + it->second.string() + " does not exist");
  auto builtin = default_template(name);
  auto loaded = PromptTemplate::load(it->second);
  for (const auto& var : builtin.required_vars()) {
    if (!loaded.required_vars().count(var)) {
      throw ConfigError("template " + it->second.string() + " does not use {" + var + "}");
    }
  }
  return PromptTemplate(name, loaded.body(), builtin.required_vars());
}

}  // namespace userprof
