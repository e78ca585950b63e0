#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "userprof/embedding.hpp"
#include "userprof/llm_gateway.hpp"
#include "userprof/pooling.hpp"

namespace userprof {

enum class StatementSource { generated, curated };

const char* to_string(StatementSource s);
StatementSource statement_source_from_string(std::string_view s);

struct StanceStatement {
  std::string id;
  std::string text;
  StatementSource source = StatementSource::generated;
};

void write_statements_json(const std::filesystem::path& path, const std::vector<StanceStatement>& statements);
/// Rejects empty text and duplicate ids.
std::vector<StanceStatement> read_statements_json(const std::filesystem::path& path);

/// Resolves a tweet id to its text; throws NotFound for unknown ids.
using TweetText = std::function<const std::string&(const std::string& id)>;

struct GenerationResult {
  std::vector<StanceStatement> statements;  // ids R0001, R0002, ... in output order
  std::vector<std::string> warnings;
  std::size_t calls = 0;
};

/// Tweets of all pools, in pool order, are cut into batches of `batch_size`;
/// one completion per batch (at most `max_batches`, 0 = all). Each non-empty
/// response line becomes a statement, with list bullets and numbering removed.
GenerationResult generate_statements(const std::vector<UserPool>& pools, const TweetText& text_of,
                                     const PromptTemplate& tpl, Gateway& gateway, std::size_t batch_size = 25,
                                     std::size_t max_batches = 0);

/// Strips a leading bullet ("-", "*", "•") or enumerator ("3.", "3)") and whitespace.
std::string strip_list_marker(std::string_view line);

/// Greedy pass in input order: a statement is dropped when its normalized text
/// equals a kept one or its cosine similarity to a kept one is >= threshold.
std::vector<StanceStatement> dedup_statements(const std::vector<StanceStatement>& raw, const Embedder& embedder,
                                              double sim_threshold);

/// The selected statements in selection order, marked curated.
std::vector<StanceStatement> curate_statements(const std::vector<StanceStatement>& deduped,
                                               const std::vector<std::string>& selection);

enum class EntryStatus { ok, no_evidence, failed };

const char* to_string(EntryStatus s);

struct ProfileEntry {
  std::string summary;
  std::vector<std::string> citations;  // pool ids in order of first citation
  EntryStatus status = EntryStatus::ok;
};

/// Abstractive and extractive profile of one user keyed by statement id.
struct UserProfile {
  std::string user_id;
  std::map<std::string, ProfileEntry> abstractive;
  std::map<std::string, std::vector<std::string>> extractive;

  std::string to_json() const;
  static UserProfile from_json(std::string_view text);
};

void write_profiles_jsonl(const std::filesystem::path& path, const std::vector<UserProfile>& profiles);
std::vector<UserProfile> read_profiles_jsonl(const std::filesystem::path& path);

struct GroundingViolation {
  std::string user_id;
  std::string statement_id;
  std::string cited_id;
};

struct GroundednessReport {
  std::size_t citations_checked = 0;
  std::vector<GroundingViolation> violations;
  std::size_t flagged_entries = 0;
  std::size_t failed_entries = 0;

  void merge(const GroundednessReport& other);
  std::string to_json() const;
};

/// Ids inside [T<id>] tags, in order, duplicates removed.
std::vector<std::string> parse_citations(std::string_view response);

/// "[T<id>] <text>" lines.
std::string format_tweets(const std::vector<std::string>& ids, const TweetText& text_of);

struct ProfileResult {
  UserProfile profile;
  GroundednessReport groundedness;
};

/// One completion per statement with the whole pool as context. Requests run
/// on up to `max_in_flight` threads; the result does not depend on scheduling.
ProfileResult profile_user(const UserPool& pool, const TweetText& text_of,
                           const std::vector<StanceStatement>& statements, const PromptTemplate& tpl,
                           Gateway& gateway, std::size_t max_in_flight = 1);

inline constexpr std::string_view kNoEvidence = "No evidence found.";

/// One summary of the whole pool, used as the entry of every statement.
UserProfile amazon_whole_history(const UserPool& pool, const TweetText& text_of,
                                 const std::vector<StanceStatement>& statements, const PromptTemplate& tpl,
                                 Gateway& gateway);

/// Per statement: the `top_j` pool tweets nearest to the statement embedding
/// are summarized. `pool_vectors` must hold the pool's tweets; statement
/// vectors are rows aligned with `statements`.
UserProfile amazon_rag(const UserPool& pool, const TweetText& text_of, const EmbeddedSet& pool_vectors,
                       const std::vector<StanceStatement>& statements, const Matrix& statement_vectors,
                       std::size_t top_j, const PromptTemplate& tpl, Gateway& gateway,
                       std::size_t max_in_flight = 1);

}  // namespace userprof
