#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "userprof/community.hpp"
#include "userprof/corpus.hpp"
#include "userprof/domain_filter.hpp"
#include "userprof/embedding.hpp"
#include "userprof/error.hpp"
#include "userprof/llm_gateway.hpp"
#include "userprof/pooling.hpp"

namespace userprof {

/// Invalid or inconsistent configuration; the CLI exits with status 1.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A stage ran before one of its inputs was produced; the CLI exits with status 2.
class UpstreamMissing : public Error {
 public:
  explicit UpstreamMissing(std::string stage) : Error("requires: " + stage), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class Stage { ingest, kb, filter, sample, pool, statements, profile, evaluate, serve_annotation, report };

const char* to_string(Stage s);
Stage stage_from_string(std::string_view s);
/// Stages run by `pipeline all`, in order.
const std::vector<Stage>& artifact_stages();
/// Direct and indirect inputs, in run order.
std::vector<Stage> upstream_of(Stage s);

inline const std::vector<std::string> kEvaluationMethods = {
    "extractive", "abstractive", "pool",         "random",     "random_history",
    "bm25",       "dense",       "semae",        "amazon_whole", "amazon_rag"};

struct PipelineConfig {
  nlohmann::json effective;  // defaults merged with the file
  std::filesystem::path base_dir;

  std::filesystem::path output_dir;
  std::filesystem::path corpus;
  CorpusFormat corpus_format = CorpusFormat::json_lines;
  std::filesystem::path graph;
  std::filesystem::path kg_snapshot;
  std::optional<std::filesystem::path> gold;
  std::optional<std::filesystem::path> aspects;

  EmbedderConfig embedder;

  std::vector<std::string> kb_seeds;
  std::set<std::string> kb_edge_types;
  unsigned kb_depth = 3;
  std::size_t chunk_tokens = 256;
  std::size_t chunk_overlap = 32;

  FilterConfig filter;
  TrainingHyper classifier;
  std::size_t borderline_sample = 2000;
  std::vector<KeywordGroup> keyword_groups;

  SampleSpec sample;
  double resolution = 1.0;
  std::size_t statement_users = 50;
  std::size_t profile_users = 100;
  std::size_t split_k_max = 10;

  PoolingConfig pooling;

  std::size_t statement_batch_size = 25;
  std::size_t statement_max_batches = 0;
  double dedup_threshold = 0.85;
  std::size_t statement_count = 15;
  std::vector<std::string> statement_selection;
  std::optional<std::filesystem::path> curated_statements;

  std::string gateway_provider = "mock";
  std::optional<std::filesystem::path> mock_rules;
  RemoteGatewayConfig remote;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
  std::map<std::string, std::filesystem::path> template_files;

  std::size_t amazon_rag_top_j = 5;

  std::vector<std::string> methods;
  std::size_t bootstrap_resamples = 10000;
  std::uint64_t evaluation_seed = 123;

  std::string annotation_host = "127.0.0.1";
  int annotation_port = 8080;
  std::optional<std::filesystem::path> annotation_tokens;
  std::optional<std::filesystem::path> annotation_ui;
  std::pair<std::string, std::string> annotators{"annotator-1", "annotator-2"};
  std::size_t daily_cap = 300;

  /// Parses and validates; relative paths resolve against the file's directory.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Hash of the configuration sections a stage reads.
  std::string stage_hash(Stage s) const;

  PromptTemplate prompt(const std::string& name) const;
};

/// The full default configuration as json text.
std::string default_config_json();

struct StageOutcome {
  Stage stage;
  bool skipped = false;
  std::vector<std::string> notes;
};

/// Runs stages with manifests under `output_dir/<stage>/`.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::ostream& log);

  /// Throws UpstreamMissing, ConfigError or a runtime error.
  StageOutcome run(Stage stage, bool force = false);
  std::vector<StageOutcome> run_all(bool force = false);

  /// Creates the annotation batch if needed and serves until the process is stopped.
  void serve_annotation();

  std::filesystem::path stage_dir(Stage s) const;
  const PipelineConfig& config() const noexcept { return cfg_; }

 private:
  PipelineConfig cfg_;
  std::ostream& log_;
};

}  // namespace userprof
