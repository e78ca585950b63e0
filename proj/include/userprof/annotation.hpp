#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "userprof/corpus.hpp"
#include "userprof/error.hpp"
#include "userprof/evaluation.hpp"
#include "userprof/profiling.hpp"

namespace userprof {

inline constexpr std::size_t kMaxPoolForAnnotation = 100;
inline constexpr std::size_t kDailyLabelCap = 300;

enum class TaskStatus { pending, labeled, adjudication, final };
const char* to_string(TaskStatus s);

enum class AnnotatorRole { primary, adjudicator };

struct PoolTweet {
  std::string id;
  std::string text;
  Timestamp created_at = 0;
};

struct AnnotationTask {
  std::string task_id;
  std::string user_id;
  StanceStatement statement;
  std::vector<PoolTweet> pool_tweets;
  std::string assigned_to;
  TaskStatus status = TaskStatus::pending;
};

struct AnnotationRecord {
  std::string task_id;
  std::string annotator_id;
  StanceLabel label = StanceLabel::CannotAnswer;
  Timestamp timestamp = 0;
};

struct AnnotationProgress {
  std::size_t pairs = 0;
  std::size_t final_pairs = 0;
  std::size_t adjudication_pairs = 0;
  std::size_t open_pairs = 0;
  std::size_t records = 0;
};

struct GoldExport {
  std::map<PairKey, StanceLabel> gold;
  std::vector<StanceLabel> first_primary;   // aligned with gold order
  std::vector<StanceLabel> second_primary;
  double kappa = 0.0;
  std::size_t adjudicated = 0;
};

/// Thrown by export when some pairs have no final label.
class UnfinishedPairs : public Conflict {
 public:
  explicit UnfinishedPairs(std::vector<PairKey> pairs);
  const std::vector<PairKey>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<PairKey> pairs_;
};

/// Task state persisted as an append-only event journal; opening a directory
/// replays it. All members are safe to call concurrently.
class AnnotationStore {
 public:
  using Clock = std::function<Timestamp()>;

  explicit AnnotationStore(std::filesystem::path dir, Clock clock = {}, std::size_t daily_cap = kDailyLabelCap);
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  /// Two tasks per pair, ids "<user>:<statement>:<annotator>". Throws on a
  /// missing pool or statement, a pool over 100 tweets, or a pair that exists.
  std::vector<std::string> create_batch(const std::vector<PairKey>& pairs,
                                        const std::map<std::string, std::vector<PoolTweet>>& pools,
                                        const std::vector<StanceStatement>& statements,
                                        const std::pair<std::string, std::string>& annotators);

  /// Lowest (user, statement) pending task of this annotator, or none.
  /// Throws QuotaExceeded once the annotator has used the day's cap.
  std::optional<AnnotationTask> next_task(const std::string& annotator_id);

  /// Returns the task's new status. Throws NotFound, Forbidden (not the
  /// assignee), Conflict (already labeled) or QuotaExceeded.
  TaskStatus submit_label(const std::string& task_id, const std::string& annotator_id, StanceLabel label);

  /// The adjudicator's open task, or a new one for the lowest disputed pair
  /// not yet taken. Adjudicators never see the primary labels.
  std::optional<AnnotationTask> next_adjudication(const std::string& annotator_id);

  std::optional<AnnotationTask> task(const std::string& task_id) const;
  AnnotationProgress progress() const;
  std::size_t labels_today(const std::string& annotator_id) const;
  std::size_t daily_cap() const noexcept { return cap_; }
  /// Start of the next UTC day.
  Timestamp quota_reset_at() const;
  std::vector<AnnotationRecord> records() const;

  /// Throws UnfinishedPairs listing every pair without a final label.
  GoldExport export_gold() const;

  /// Writes a snapshot of the derived state next to the journal.
  void checkpoint() const;

  const std::filesystem::path& directory() const noexcept { return dir_; }

 private:
  struct State;
  std::filesystem::path dir_;
  Clock clock_;
  std::size_t cap_;
  mutable std::shared_mutex mu_;
  std::unique_ptr<State> state_;
};

struct AnnotatorIdentity {
  std::string id;
  AnnotatorRole role = AnnotatorRole::primary;
};

/// Reads {token: {id, role}}.
std::map<std::string, AnnotatorIdentity> read_annotator_tokens(const std::filesystem::path& path);

struct AnnotationServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::map<std::string, AnnotatorIdentity> tokens;
  std::optional<std::filesystem::path> static_dir;
};

/// JSON HTTP API over an AnnotationStore:
///   GET  /tasks/next?annotator=<id>
///   POST /tasks/<id>/label      {"label": "True" | "False" | "CannotAnswer"}
///   GET  /progress
///   GET  /adjudication/next
///   GET  /export
/// Requests carry "Authorization: Bearer <token>". Errors are {error, code}.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, AnnotationServerConfig cfg);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace userprof
