#include "userprof/profiling.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/retrieval.hpp"
#include "userprof/text.hpp"
#include "work_queue.hpp"

namespace userprof {

using json = nlohmann::json;

const char* to_string(StatementSource s) { return s == StatementSource::curated ? "curated" : "generated"; }

StatementSource statement_source_from_string(std::string_view s) {
  if (s == "generated") return StatementSource::generated;
  if (s == "curated") return StatementSource::curated;
  throw InvalidArgument("unknown statement source '" + std::string(s) + "'");
}

const char* to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::ok: return "ok";
    case EntryStatus::no_evidence: return "no_evidence";
    case EntryStatus::failed: return "failed";
  }
  return "ok";
}

namespace {

EntryStatus entry_status_from_string(std::string_view s) {
  if (s == "ok") return EntryStatus::ok;
  if (s == "no_evidence") return EntryStatus::no_evidence;
  if (s == "failed") return EntryStatus::failed;
  throw InvalidArgument("unknown entry status '" + std::string(s) + "'");
}

std::string statement_id(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "R%04zu", n);
  return buf;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    out.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

}  // namespace

void write_statements_json(const std::filesystem::path& path, const std::vector<StanceStatement>& statements) {
  json j = json::array();
  for (const auto& s : statements) j.push_back({{"id", s.id}, {"text", s.text}, {"source", to_string(s.source)}});
  write_file_atomic(path, j.dump(1) + "\n");
}

std::vector<StanceStatement> read_statements_json(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  if (!j.is_array()) throw ParseError(path.string() + ": statements file must be a json list", 0);
  std::vector<StanceStatement> out;
  std::set<std::string> seen;
  for (const auto& item : j) {
    StanceStatement s{item.at("id").get<std::string>(), item.at("text").get<std::string>(),
                      statement_source_from_string(item.value("source", "curated"))};
    if (text::trim(s.text).empty()) throw InvalidArgument("statement " + s.id + " has empty text");
    if (!seen.insert(s.id).second) throw InvalidArgument("duplicate statement id " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

std::string strip_list_marker(std::string_view line) {
  std::string s = text::trim(line);
  std::string_view v = s;
  static constexpr std::string_view kBullet = "\xE2\x80\xA2";
  if (v.starts_with(kBullet)) {
    v.remove_prefix(kBullet.size());
  } else if (!v.empty() && (v[0] == '-' || v[0] == '*')) {
    v.remove_prefix(1);
  } else {
    std::size_t i = 0;
    while (i < v.size() && std::isdigit(static_cast<unsigned char>(v[i]))) ++i;
    if (i > 0 && i < v.size() && (v[i] == '.' || v[i] == ')')) v.remove_prefix(i + 1);
  }
  return text::trim(v);
}

GenerationResult generate_statements(const std::vector<UserPool>& pools, const TweetText& text_of,
                                     const PromptTemplate& tpl, Gateway& gateway, std::size_t batch_size,
                                     std::size_t max_batches) {
  if (pools.empty()) throw InvalidArgument("statement split is empty");
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  std::vector<std::string> ids;
  for (const auto& p : pools) ids.insert(ids.end(), p.tweet_ids.begin(), p.tweet_ids.end());
  if (ids.empty()) throw InvalidArgument("statement split pools hold no tweets");

  std::size_t batches = (ids.size() + batch_size - 1) / batch_size;
  if (max_batches > 0) batches = std::min(batches, max_batches);

  GenerationResult result;
  for (std::size_t b = 0; b < batches; ++b) {
    std::string tweets;
    for (std::size_t i = b * batch_size; i < std::min(ids.size(), (b + 1) * batch_size); ++i) {
      tweets += text_of(ids[i]);
      tweets += '\n';
    }
    std::string response;
    ++result.calls;
    try {
      response = gateway.complete(CompletionRequest(tpl.render({{"tweets", tweets}}))).text;
    } catch (const std::exception& e) {
      result.warnings.push_back("batch " + std::to_string(b) + " skipped: " + e.what());
      continue;
    }
    std::size_t before = result.statements.size();
    for (const auto& line : split_lines(response)) {
      std::string s = strip_list_marker(line);
      if (s.empty()) continue;
      result.statements.push_back({statement_id(result.statements.size() + 1), std::move(s)});
    }
    if (result.statements.size() == before) {
      result.warnings.push_back("batch " + std::to_string(b) + " skipped: response has no statements");
    }
  }
  return result;
}

std::vector<StanceStatement> dedup_statements(const std::vector<StanceStatement>& raw, const Embedder& embedder,
                                              double sim_threshold) {
  if (raw.empty()) throw InvalidArgument("no statements to deduplicate");
  if (!(sim_threshold > 0.0 && sim_threshold < 1.0)) throw InvalidArgument("similarity threshold must be in (0, 1)");
  std::vector<std::string> texts;
  texts.reserve(raw.size());
  for (const auto& s : raw) texts.push_back(s.text);
  Matrix vecs = embedder.embed_batch(texts);

  std::vector<StanceStatement> kept;
  std::vector<std::size_t> kept_rows;
  std::unordered_set<std::string> kept_norm;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::string norm = text::normalize(raw[i].text);
    if (kept_norm.count(norm)) continue;
    bool similar = std::any_of(kept_rows.begin(), kept_rows.end(), [&](std::size_t r) {
      return cosine_similarity(vecs.row(i), vecs.row(r)) >= sim_threshold;
    });
    if (similar) continue;
    kept_norm.insert(std::move(norm));
    kept_rows.push_back(i);
    kept.push_back(raw[i]);
  }
  return kept;
}

std::vector<StanceStatement> curate_statements(const std::vector<StanceStatement>& deduped,
                                               const std::vector<std::string>& selection) {
  if (selection.empty()) throw InvalidArgument("statement selection is empty");
  std::map<std::string, const StanceStatement*> by_id;
  for (const auto& s : deduped) by_id[s.id] = &s;
  std::set<std::string> seen;
  std::vector<StanceStatement> out;
  for (const auto& id : selection) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("unknown statement id " + id);
    if (!seen.insert(id).second) throw InvalidArgument("statement " + id + " selected twice");
    StanceStatement s = *it->second;
    s.source = StatementSource::curated;
    out.push_back(std::move(s));
  }
  return out;
}

std::string UserProfile::to_json() const {
  json abs = json::object();
  for (const auto& [sid, e] : abstractive) {
    abs[sid] = {{"summary", e.summary}, {"citations", e.citations}, {"status", userprof::to_string(e.status)}};
  }
  json ext = json::object();
  for (const auto& [sid, ids] : extractive) ext[sid] = ids;
  return json{{"user_id", user_id}, {"abstractive", abs}, {"extractive", ext}}.dump();
}

UserProfile UserProfile::from_json(std::string_view text) {
  json j = json::parse(text);
  UserProfile p;
  p.user_id = j.at("user_id").get<std::string>();
  for (const auto& [sid, e] : j.at("abstractive").items()) {
    p.abstractive[sid] = {e.at("summary").get<std::string>(), e.at("citations").get<std::vector<std::string>>(),
                          entry_status_from_string(e.value("status", "ok"))};
  }
  for (const auto& [sid, ids] : j.at("extractive").items()) p.extractive[sid] = ids.get<std::vector<std::string>>();
  return p;
}

void write_profiles_jsonl(const std::filesystem::path& path, const std::vector<UserProfile>& profiles) {
  std::string out;
  for (const auto& p : profiles) out += p.to_json() + "\n";
  write_file_atomic(path, out);
}

std::vector<UserProfile> read_profiles_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  std::vector<UserProfile> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(UserProfile::from_json(line));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
  }
  return out;
}

void GroundednessReport::merge(const GroundednessReport& other) {
  citations_checked += other.citations_checked;
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
  flagged_entries += other.flagged_entries;
  failed_entries += other.failed_entries;
}

std::string GroundednessReport::to_json() const {
  json v = json::array();
  for (const auto& x : violations) {
    v.push_back({{"user_id", x.user_id}, {"statement_id", x.statement_id}, {"cited_id", x.cited_id}});
  }
  return json{{"citations_checked", citations_checked},
              {"violation_count", violations.size()},
              {"violations", v},
              {"no_evidence_entries", flagged_entries},
              {"failed_entries", failed_entries}}
      .dump(1);
}

std::vector<std::string> parse_citations(std::string_view response) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t pos = 0;
  while ((pos = response.find("[T", pos)) != std::string_view::npos) {
    std::size_t i = pos + 2;
    while (i < response.size() && response[i] != ']' && !std::isspace(static_cast<unsigned char>(response[i])) &&
           response[i] != '[') {
      ++i;
    }
    if (i < response.size() && response[i] == ']' && i > pos + 2) {
      std::string id(response.substr(pos + 2, i - pos - 2));
      if (seen.insert(id).second) out.push_back(std::move(id));
      pos = i + 1;
    } else {
      pos += 2;
    }
  }
  return out;
}

std::string format_tweets(const std::vector<std::string>& ids, const TweetText& text_of) {
  std::string out;
  for (const auto& id : ids) {
    out += "[T" + id + "] ";
    out += text_of(id);
    out += '\n';
  }
  return out;
}

ProfileResult profile_user(const UserPool& pool, const TweetText& text_of,
                           const std::vector<StanceStatement>& statements, const PromptTemplate& tpl,
                           Gateway& gateway, std::size_t max_in_flight) {
  if (pool.tweet_ids.empty()) throw InvalidArgument("pool of user " + pool.user_id + " is empty");
  if (statements.empty()) throw InvalidArgument("no statements to profile against");
  const std::string tweets = format_tweets(pool.tweet_ids, text_of);
  const std::unordered_set<std::string> in_pool(pool.tweet_ids.begin(), pool.tweet_ids.end());

  std::vector<ProfileEntry> entries(statements.size());
  std::vector<GroundednessReport> reports(statements.size());
  detail::run_bounded(statements.size(), max_in_flight, [&](std::size_t i) {
    const auto& st = statements[i];
    auto& entry = entries[i];
    auto& report = reports[i];
    std::string prompt = tpl.render(
        {{"user_id", pool.user_id}, {"statement_id", st.id}, {"statement", st.text}, {"tweets", tweets}});
    std::string response;
    try {
      response = gateway.complete(CompletionRequest(prompt)).text;
    } catch (const std::exception& e) {
      entry.summary = std::string("generation failed: ") + e.what();
      entry.status = EntryStatus::failed;
      report.failed_entries = 1;
      return;
    }
    for (auto& id : parse_citations(response)) {
      ++report.citations_checked;
      if (in_pool.count(id)) {
        entry.citations.push_back(std::move(id));
      } else {
        report.violations.push_back({pool.user_id, st.id, std::move(id)});
      }
    }
    if (entry.citations.empty()) {
      entry.summary = std::string(kNoEvidence);
      entry.status = EntryStatus::no_evidence;
      report.flagged_entries = 1;
    } else {
      entry.summary = text::trim(response);
    }
  });

  ProfileResult result;
  result.profile.user_id = pool.user_id;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    result.profile.extractive[statements[i].id] = entries[i].citations;
    result.profile.abstractive[statements[i].id] = std::move(entries[i]);
    result.groundedness.merge(reports[i]);
  }
  return result;
}

UserProfile amazon_whole_history(const UserPool& pool, const TweetText& text_of,
                                 const std::vector<StanceStatement>& statements, const PromptTemplate& tpl,
                                 Gateway& gateway) {
  if (pool.tweet_ids.empty()) throw InvalidArgument("pool of user " + pool.user_id + " is empty");
  if (statements.empty()) throw InvalidArgument("no statements to profile against");
  ProfileEntry entry;
  try {
    entry.summary = text::trim(gateway.complete(CompletionRequest(tpl.render({{"tweets", format_tweets(pool.tweet_ids, text_of)}}))).text);
  } catch (const std::exception& e) {
    entry.summary = std::string("generation failed: ") + e.what();
    entry.status = EntryStatus::failed;
  }
  UserProfile p;
  p.user_id = pool.user_id;
  for (const auto& st : statements) {
    p.abstractive[st.id] = entry;
    p.extractive[st.id] = {};
  }
  return p;
}

UserProfile amazon_rag(const UserPool& pool, const TweetText& text_of, const EmbeddedSet& pool_vectors,
                       const std::vector<StanceStatement>& statements, const Matrix& statement_vectors,
                       std::size_t top_j, const PromptTemplate& tpl, Gateway& gateway, std::size_t max_in_flight) {
  if (pool.tweet_ids.empty()) throw InvalidArgument("pool of user " + pool.user_id + " is empty");
  if (statements.empty()) throw InvalidArgument("no statements to profile against");
  if (statement_vectors.rows() != statements.size()) {
    throw InvalidArgument("statement vectors do not align with statements");
  }
  if (top_j == 0) throw InvalidArgument("top_j must be positive");
  VectorIndex index = VectorIndex::build(pool_vectors.ids, pool_vectors.vectors);

  std::vector<ProfileEntry> entries(statements.size());
  detail::run_bounded(statements.size(), max_in_flight, [&](std::size_t i) {
    auto& entry = entries[i];
    for (const auto& n : dense_rank(index, statement_vectors.row(i), top_j)) entry.citations.push_back(n.id);
    std::string prompt =
        tpl.render({{"statement", statements[i].text}, {"tweets", format_tweets(entry.citations, text_of)}});
    try {
      entry.summary = text::trim(gateway.complete(CompletionRequest(prompt)).text);
    } catch (const std::exception& e) {
      entry.summary = std::string("generation failed: ") + e.what();
      entry.status = EntryStatus::failed;
    }
  });

  UserProfile p;
  p.user_id = pool.user_id;
  for (std::size_t i = 0; i < statements.size(); ++i) {
    p.extractive[statements[i].id] = entries[i].citations;
    p.abstractive[statements[i].id] = std::move(entries[i]);
  }
  return p;
}

}  // namespace userprof
