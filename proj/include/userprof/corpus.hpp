#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace userprof {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Parses ISO-8601 `YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]`; fractional seconds are dropped.
Timestamp parse_iso8601(std::string_view s);
std::string format_iso8601(Timestamp t);

struct Tweet {
  std::string id;
  std::string user_id;
  std::string text;
  Timestamp created_at = 0;
  std::uint64_t retweet_count = 0;
  std::uint64_t like_count = 0;

  bool operator==(const Tweet&) const = default;
};

/// A user's tweets, ordered by (created_at, id).
struct UserRecord {
  std::string user_id;
  std::vector<std::string> tweet_ids;
};

enum class CorpusFormat { json_lines, csv };

CorpusFormat parse_corpus_format(std::string_view name);

/// Immutable tweet collection. Tweets are held in canonical order
/// (created_at, then id); users are sorted by id.
class Corpus {
 public:
  Corpus() = default;

  /// Builds a corpus from in-memory tweets. Rejects duplicate ids; drops
  /// tweets whose normalized text is empty and counts them.
  static Corpus from_tweets(std::vector<Tweet> tweets);

  /// Reads a tweet file. Parse errors and duplicate ids carry the offending line.
  static Corpus ingest(const std::filesystem::path& path, CorpusFormat format);
  static Corpus ingest_stream(std::istream& in, CorpusFormat format);

  std::size_t tweet_count() const noexcept { return tweets_.size(); }
  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t dropped_empty() const noexcept { return dropped_empty_; }

  const std::vector<Tweet>& tweets() const noexcept { return tweets_; }
  const std::vector<UserRecord>& users() const noexcept { return users_; }

  /// nullptr when unknown.
  const Tweet* find(std::string_view id) const;
  const UserRecord* find_user(std::string_view user_id) const;

  /// Tweets of one user in canonical order.
  std::vector<const Tweet*> tweets_of(std::string_view user_id) const;

  /// Keeps only tweets whose ids are listed; unknown ids are ignored.
  Corpus subset(const std::vector<std::string>& ids) const;

  /// Canonical json-lines export (one tweet per line in canonical order).
  void write_jsonl(std::ostream& out) const;
  void write_jsonl(const std::filesystem::path& path) const;

 private:
  std::vector<Tweet> tweets_;
  std::vector<UserRecord> users_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t dropped_empty_ = 0;
};

/// Directed retweet edges aggregated by (source, target).
struct RetweetEdge {
  std::string source;
  std::string target;
  double weight = 1.0;
};

class RetweetGraph {
 public:
  /// Edges with identical endpoints are merged by summing weights. Weights must be >= 1.
  static RetweetGraph from_edges(std::vector<RetweetEdge> edges, std::vector<std::string> extra_nodes = {});
  static RetweetGraph load(const std::filesystem::path& path);

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<RetweetEdge>& edges() const noexcept { return edges_; }

  /// Undirected view: each unordered pair once with summed weight, (a <= b).
  std::vector<RetweetEdge> undirected_edges() const;

  void write_jsonl(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> nodes_;
  std::vector<RetweetEdge> edges_;
};

/// Venn-style tweet counts over keyword name sets. `regions[mask]` counts the
/// tweets whose matched-set pattern is exactly `mask` (bit i = name set i);
/// regions[0] holds tweets matching none.
struct OverlapCounts {
  std::size_t set_count = 0;
  std::vector<std::size_t> regions;

  /// Tweets matching at least every set in `mask`.
  std::size_t at_least(unsigned mask) const;
  std::size_t matching_any() const;
};

OverlapCounts candidate_overlap(const Corpus& corpus, const std::vector<std::vector<std::string>>& name_sets);

struct GroupStats {
  std::size_t tweets = 0;
  std::size_t users = 0;
  double avg_tweets_per_user = 0.0;
  double avg_text_length = 0.0;
  double median_text_length = 0.0;
};

struct GroupDelta {
  std::string group;
  GroupStats before;
  GroupStats after;
  double tweets_pct = 0.0;
  double users_pct = 0.0;
  double avg_tweets_per_user_pct = 0.0;
  double avg_text_length_pct = 0.0;
  double median_text_length_pct = 0.0;
};

struct KeywordGroup {
  std::string name;
  std::vector<std::string> keywords;
};

struct DeltaReport {
  std::vector<GroupDelta> groups;

  std::string to_text() const;
};

/// Per-group percentage changes between a corpus and a filtered subset of it.
/// Text length is measured in code points.
DeltaReport filter_deltas(const Corpus& before, const Corpus& after, const std::vector<KeywordGroup>& groups);

}  // namespace userprof
