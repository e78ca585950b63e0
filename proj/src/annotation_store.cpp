#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>

#include <json.hpp>

#include "userprof/annotation.hpp"
#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::labeled: return "labeled";
    case TaskStatus::adjudication: return "adjudication";
    case TaskStatus::final: return "final";
  }
  return "pending";
}

namespace {

constexpr Timestamp kDay = 86400;

Timestamp day_of(Timestamp t) { return t >= 0 ? t / kDay : -((-t + kDay - 1) / kDay); }

std::string describe(const std::vector<PairKey>& pairs) {
  std::string s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) s += ", ";
    if (i == 20) {
      s += "... (" + std::to_string(pairs.size()) + " total)";
      break;
    }
    s += pairs[i].first + "/" + pairs[i].second;
  }
  return s;
}

}  // namespace

UnfinishedPairs::UnfinishedPairs(std::vector<PairKey> pairs)
    : Conflict("unfinished pairs: " + describe(pairs)), pairs_(std::move(pairs)) {}

struct AnnotationStore::State {
  enum class Slot { first, second, adjudicator };

  struct Task {
    std::string id;
    PairKey pair;
    std::string annotator;
    Slot slot = Slot::first;
    TaskStatus status = TaskStatus::pending;
    std::optional<StanceLabel> label;
  };

  struct Pair {
    std::string first_task;
    std::string second_task;
    std::optional<std::string> adj_task;
    std::optional<StanceLabel> final_label;
    bool disputed = false;
  };

  std::map<std::string, StanceStatement> statements;
  std::map<std::string, std::vector<PoolTweet>> pools;
  std::map<PairKey, Pair> pairs;
  std::map<std::string, Task> tasks;
  std::vector<AnnotationRecord> records;
  std::map<std::string, std::map<Timestamp, std::size_t>> daily;
  std::ofstream journal;

  void apply(const json& ev) {
    const std::string kind = ev.at("event").get<std::string>();
    if (kind == "batch") {
      auto ann = ev.at("annotators").get<std::vector<std::string>>();
      for (const auto& s : ev.at("statements")) {
        StanceStatement st{s.at("id").get<std::string>(), s.at("text").get<std::string>(), StatementSource::curated};
        statements.emplace(st.id, st);
      }
      for (const auto& [user, tweets] : ev.at("pools").items()) {
        std::vector<PoolTweet> pool;
        for (const auto& t : tweets) {
          pool.push_back({t.at("id").get<std::string>(), t.at("text").get<std::string>(),
                          t.at("created_at").get<Timestamp>()});
        }
        pools.emplace(user, std::move(pool));
      }
      for (const auto& p : ev.at("pairs")) {
        PairKey key{p.at(0).get<std::string>(), p.at(1).get<std::string>()};
        Pair pair;
        pair.first_task = task_id(key, ann.at(0));
        pair.second_task = task_id(key, ann.at(1));
        tasks[pair.first_task] = {pair.first_task, key, ann[0], Slot::first, TaskStatus::pending, std::nullopt};
        tasks[pair.second_task] = {pair.second_task, key, ann[1], Slot::second, TaskStatus::pending, std::nullopt};
        pairs.emplace(key, std::move(pair));
      }
    } else if (kind == "adjudication") {
      PairKey key{ev.at("user_id").get<std::string>(), ev.at("statement_id").get<std::string>()};
      std::string id = key.first + ":" + key.second + ":adj";
      tasks[id] = {id, key, ev.at("annotator").get<std::string>(), Slot::adjudicator, TaskStatus::pending, std::nullopt};
      pairs.at(key).adj_task = id;
    } else if (kind == "label") {
      AnnotationRecord rec{ev.at("task_id").get<std::string>(), ev.at("annotator").get<std::string>(),
                           stance_label_from_string(ev.at("label").get<std::string>()), ev.at("ts").get<Timestamp>()};
      Task& task = tasks.at(rec.task_id);
      task.label = rec.label;
      ++daily[rec.annotator_id][day_of(rec.timestamp)];
      Pair& pair = pairs.at(task.pair);
      if (task.slot == Slot::adjudicator) {
        task.status = TaskStatus::final;
        pair.final_label = rec.label;
        tasks.at(pair.first_task).status = TaskStatus::final;
        tasks.at(pair.second_task).status = TaskStatus::final;
      } else {
        task.status = TaskStatus::labeled;
        Task& a = tasks.at(pair.first_task);
        Task& b = tasks.at(pair.second_task);
        if (a.label && b.label) {
          if (*a.label == *b.label) {
            pair.final_label = a.label;
            a.status = b.status = TaskStatus::final;
          } else {
            pair.disputed = true;
            a.status = b.status = TaskStatus::adjudication;
          }
        }
      }
      records.push_back(std::move(rec));
    } else {
      throw ParseError("unknown journal event '" + kind + "'", 0);
    }
  }

  static std::string task_id(const PairKey& key, const std::string& annotator) {
    return key.first + ":" + key.second + ":" + annotator;
  }

  AnnotationTask view(const Task& t) const {
    return {t.id, t.pair.first, statements.at(t.pair.second), pools.at(t.pair.first), t.annotator, t.status};
  }

  std::size_t today(const std::string& annotator, Timestamp now) const {
    auto it = daily.find(annotator);
    if (it == daily.end()) return 0;
    auto d = it->second.find(day_of(now));
    return d == it->second.end() ? 0 : d->second;
  }
};

namespace {

Timestamp system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

AnnotationStore::AnnotationStore(std::filesystem::path dir, Clock clock, std::size_t daily_cap)
    : dir_(std::move(dir)), clock_(clock ? std::move(clock) : Clock(system_now)), cap_(daily_cap),
      state_(std::make_unique<State>()) {
  if (cap_ == 0) throw InvalidArgument("daily cap must be positive");
  std::filesystem::create_directories(dir_);
  const auto journal_path = dir_ / "journal.jsonl";
  if (std::filesystem::exists(journal_path)) {
    std::ifstream in(journal_path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      json ev;
      try {
        ev = json::parse(lines[i]);
      } catch (const json::parse_error&) {
        // A torn final write from a crash is discarded; anything earlier is corruption.
        if (i + 1 == lines.size()) {
          in.close();
          std::ofstream rewrite(journal_path, std::ios::trunc);
          for (std::size_t j = 0; j < i; ++j) rewrite << lines[j] << '\n';
          break;
        }
        throw ParseError(journal_path.string() + ": corrupt journal entry", i + 1);
      }
      state_->apply(ev);
    }
  }
  state_->journal.open(journal_path, std::ios::app);
  if (!state_->journal) throw Error("cannot open journal " + journal_path.string());
}

AnnotationStore::~AnnotationStore() = default;

namespace {

void append(std::ofstream& journal, const json& ev) {
  journal << ev.dump() << '\n';
  journal.flush();
  if (!journal) throw Error("journal write failed");
}

}  // namespace

std::vector<std::string> AnnotationStore::create_batch(const std::vector<PairKey>& pairs,
                                                       const std::map<std::string, std::vector<PoolTweet>>& pools,
                                                       const std::vector<StanceStatement>& statements,
                                                       const std::pair<std::string, std::string>& annotators) {
  if (annotators.first.empty() || annotators.second.empty() || annotators.first == annotators.second) {
    throw InvalidArgument("a batch needs two distinct primary annotators");
  }
  if (pairs.empty()) return {};
  std::unique_lock lock(mu_);
  std::map<std::string, const StanceStatement*> by_id;
  for (const auto& s : statements) by_id[s.id] = &s;

  std::set<PairKey> seen;
  json ev_pairs = json::array();
  json ev_pools = json::object();
  std::map<std::string, const StanceStatement*> used;
  std::vector<std::string> ids;
  for (const auto& key : pairs) {
    if (!seen.insert(key).second || state_->pairs.count(key)) {
      throw Conflict("duplicate pair " + key.first + "/" + key.second);
    }
    auto pool = pools.find(key.first);
    if (pool == pools.end()) throw NotFound("no pool for user " + key.first);
    if (pool->second.empty()) throw InvalidArgument("pool of user " + key.first + " is empty");
    if (pool->second.size() > kMaxPoolForAnnotation) {
      throw InvalidArgument("pool of user " + key.first + " has " + std::to_string(pool->second.size()) +
                            " tweets; at most 100 allowed");
    }
    auto st = by_id.find(key.second);
    if (st == by_id.end()) throw NotFound("unknown statement " + key.second);
    auto known = state_->statements.find(key.second);
    if (known != state_->statements.end() && known->second.text != st->second->text) {
      throw Conflict("statement " + key.second + " differs from an earlier batch");
    }
    used[key.second] = st->second;
    if (!state_->pools.count(key.first) && !ev_pools.contains(key.first)) {
      json tweets = json::array();
      for (const auto& t : pool->second) tweets.push_back({{"id", t.id}, {"text", t.text}, {"created_at", t.created_at}});
      ev_pools[key.first] = std::move(tweets);
    }
    ev_pairs.push_back({key.first, key.second});
    ids.push_back(State::task_id(key, annotators.first));
    ids.push_back(State::task_id(key, annotators.second));
  }
  json ev_statements = json::array();
  for (const auto& [id, s] : used) ev_statements.push_back({{"id", id}, {"text", s->text}});
  json ev = {{"event", "batch"},
             {"annotators", {annotators.first, annotators.second}},
             {"statements", ev_statements},
             {"pools", ev_pools},
             {"pairs", ev_pairs}};
  append(state_->journal, ev);
  state_->apply(ev);
  return ids;
}

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator_id) {
  Timestamp now = clock_();
  std::shared_lock lock(mu_);
  if (state_->today(annotator_id, now) >= cap_) {
    throw QuotaExceeded("daily cap of " + std::to_string(cap_) + " labels reached for " + annotator_id,
                        (day_of(now) + 1) * kDay);
  }
  for (const auto& [key, pair] : state_->pairs) {
    for (const auto* id : {&pair.first_task, &pair.second_task}) {
      const auto& t = state_->tasks.at(*id);
      if (t.annotator == annotator_id && t.status == TaskStatus::pending) return state_->view(t);
    }
  }
  return std::nullopt;
}

TaskStatus AnnotationStore::submit_label(const std::string& task_id, const std::string& annotator_id,
                                         StanceLabel label) {
  Timestamp now = clock_();
  std::unique_lock lock(mu_);
  auto it = state_->tasks.find(task_id);
  if (it == state_->tasks.end()) throw NotFound("unknown task " + task_id);
  const auto& t = it->second;
  if (t.annotator != annotator_id) throw Forbidden("task " + task_id + " is not assigned to " + annotator_id);
  if (t.label) throw Conflict("task " + task_id + " is already labeled");
  if (state_->today(annotator_id, now) >= cap_) {
    throw QuotaExceeded("daily cap of " + std::to_string(cap_) + " labels reached for " + annotator_id,
                        (day_of(now) + 1) * kDay);
  }
  json ev = {{"event", "label"}, {"task_id", task_id}, {"annotator", annotator_id}, {"label", to_string(label)},
             {"ts", now}};
  append(state_->journal, ev);
  state_->apply(ev);
  return state_->tasks.at(task_id).status;
}

std::optional<AnnotationTask> AnnotationStore::next_adjudication(const std::string& annotator_id) {
  Timestamp now = clock_();
  std::unique_lock lock(mu_);
  if (state_->today(annotator_id, now) >= cap_) {
    throw QuotaExceeded("daily cap of " + std::to_string(cap_) + " labels reached for " + annotator_id,
                        (day_of(now) + 1) * kDay);
  }
  for (const auto& [key, pair] : state_->pairs) {
    if (!pair.adj_task) continue;
    const auto& t = state_->tasks.at(*pair.adj_task);
    if (t.annotator == annotator_id && t.status == TaskStatus::pending) return state_->view(t);
  }
  for (const auto& [key, pair] : state_->pairs) {
    if (!pair.disputed || pair.adj_task || pair.final_label) continue;
    if (state_->tasks.at(pair.first_task).annotator == annotator_id ||
        state_->tasks.at(pair.second_task).annotator == annotator_id) {
      continue;
    }
    json ev = {{"event", "adjudication"}, {"user_id", key.first}, {"statement_id", key.second},
               {"annotator", annotator_id}};
    append(state_->journal, ev);
    state_->apply(ev);
    return state_->view(state_->tasks.at(*state_->pairs.at(key).adj_task));
  }
  return std::nullopt;
}

std::optional<AnnotationTask> AnnotationStore::task(const std::string& task_id) const {
  std::shared_lock lock(mu_);
  auto it = state_->tasks.find(task_id);
  if (it == state_->tasks.end()) return std::nullopt;
  return state_->view(it->second);
}

AnnotationProgress AnnotationStore::progress() const {
  std::shared_lock lock(mu_);
  AnnotationProgress p;
  p.pairs = state_->pairs.size();
  for (const auto& [key, pair] : state_->pairs) {
    if (pair.final_label) {
      ++p.final_pairs;
    } else if (pair.disputed) {
      ++p.adjudication_pairs;
    } else {
      ++p.open_pairs;
    }
  }
  p.records = state_->records.size();
  return p;
}

std::size_t AnnotationStore::labels_today(const std::string& annotator_id) const {
  Timestamp now = clock_();
  std::shared_lock lock(mu_);
  return state_->today(annotator_id, now);
}

Timestamp AnnotationStore::quota_reset_at() const { return (day_of(clock_()) + 1) * kDay; }

std::vector<AnnotationRecord> AnnotationStore::records() const {
  std::shared_lock lock(mu_);
  return state_->records;
}

GoldExport AnnotationStore::export_gold() const {
  std::shared_lock lock(mu_);
  std::vector<PairKey> unfinished;
  for (const auto& [key, pair] : state_->pairs) {
    if (!pair.final_label) unfinished.push_back(key);
  }
  if (!unfinished.empty()) throw UnfinishedPairs(std::move(unfinished));
  if (state_->pairs.empty()) throw Conflict("no pairs to export");
  GoldExport out;
  for (const auto& [key, pair] : state_->pairs) {
    out.gold.emplace(key, *pair.final_label);
    out.first_primary.push_back(*state_->tasks.at(pair.first_task).label);
    out.second_primary.push_back(*state_->tasks.at(pair.second_task).label);
    if (pair.adj_task) ++out.adjudicated;
  }
  out.kappa = cohens_kappa(out.first_primary, out.second_primary);
  return out;
}

void AnnotationStore::checkpoint() const {
  std::shared_lock lock(mu_);
  json pairs = json::array();
  for (const auto& [key, pair] : state_->pairs) {
    json p = {{"user_id", key.first}, {"statement_id", key.second}};
    p["status"] = pair.final_label ? "final" : pair.disputed ? "adjudication" : "open";
    if (pair.final_label) p["label"] = to_string(*pair.final_label);
    pairs.push_back(std::move(p));
  }
  json snap = {{"records", state_->records.size()}, {"tasks", state_->tasks.size()}, {"pairs", pairs}};
  write_file_atomic(dir_ / "snapshot.json", snap.dump(1) + "\n");
}

std::map<std::string, AnnotatorIdentity> read_annotator_tokens(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  std::map<std::string, AnnotatorIdentity> out;
  std::set<std::string> ids;
  for (const auto& [token, v] : j.items()) {
    if (token.empty()) throw InvalidArgument("empty annotator token");
    AnnotatorIdentity a;
    a.id = v.at("id").get<std::string>();
    std::string role = v.value("role", "primary");
    if (role == "primary") {
      a.role = AnnotatorRole::primary;
    } else if (role == "adjudicator") {
      a.role = AnnotatorRole::adjudicator;
    } else {
      throw InvalidArgument("unknown annotator role '" + role + "'");
    }
    if (!ids.insert(a.id).second) throw InvalidArgument("annotator " + a.id + " has two tokens");
    out.emplace(token, std::move(a));
  }
  return out;
}

}  // namespace userprof
