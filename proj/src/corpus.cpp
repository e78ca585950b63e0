#include "userprof/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "userprof/error.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

namespace {

int parse_digits(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw InvalidArgument("timestamp too short");
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') throw InvalidArgument("bad digit in timestamp");
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect_char(std::string_view s, std::size_t pos, char c) {
  if (pos >= s.size() || s[pos] != c) throw InvalidArgument("malformed timestamp");
}

}  // namespace

Timestamp parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y = parse_digits(s, 0, 4);
  expect_char(s, 4, '-');
  int mo = parse_digits(s, 5, 2);
  expect_char(s, 7, '-');
  int d = parse_digits(s, 8, 2);
  if (s.size() < 11 || (s[10] != 'T' && s[10] != ' ')) throw InvalidArgument("malformed timestamp");
  int h = parse_digits(s, 11, 2);
  expect_char(s, 13, ':');
  int mi = parse_digits(s, 14, 2);
  expect_char(s, 16, ':');
  int sec = parse_digits(s, 17, 2);
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
  }
  long offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '+' ? 1 : -1;
      int oh = parse_digits(s, pos + 1, 2);
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      int om = parse_digits(s, mpos, 2);
      offset = sign * (oh * 3600L + om * 60L);
      pos = mpos + 2;
    }
  }
  if (pos != s.size()) throw InvalidArgument("trailing characters in timestamp");
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw InvalidArgument("timestamp out of range");
  auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + sec - offset;
}

std::string format_iso8601(Timestamp t) {
  using namespace std::chrono;
  Timestamp days = t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
  Timestamp rem = t - days * 86400;
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
  return buf;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "json-lines" || name == "jsonl") return CorpusFormat::json_lines;
  if (name == "csv") return CorpusFormat::csv;
  throw InvalidArgument("unknown corpus format: " + std::string(name));
}

namespace {

struct RawRecord {
  Tweet tweet;
  std::size_t line;
};

std::string id_string(const json& v, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw InvalidArgument(std::string("field '") + key + "' must be a string");
}

std::uint64_t parse_count(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidArgument("count must be a non-negative integer");
  return v;
}

Tweet tweet_from_json(const json& obj) {
  if (!obj.is_object()) throw InvalidArgument("record is not an object");
  for (const char* key : {"id", "user_id", "text", "created_at"}) {
    if (!obj.contains(key)) throw InvalidArgument(std::string("missing field '") + key + "'");
  }
  Tweet t;
  t.id = id_string(obj["id"], "id");
  t.user_id = id_string(obj["user_id"], "user_id");
  if (!obj["text"].is_string()) throw InvalidArgument("field 'text' must be a string");
  t.text = obj["text"].get<std::string>();
  if (!obj["created_at"].is_string()) throw InvalidArgument("field 'created_at' must be a string");
  t.created_at = parse_iso8601(obj["created_at"].get<std::string>());
  for (auto [key, dst] : {std::pair{"retweet_count", &t.retweet_count}, std::pair{"like_count", &t.like_count}}) {
    if (!obj.contains(key) || obj[key].is_null()) continue;
    if (!obj[key].is_number_unsigned() && !(obj[key].is_number_integer() && obj[key].get<std::int64_t>() >= 0)) {
      throw InvalidArgument(std::string("field '") + key + "' must be a non-negative integer");
    }
    *dst = obj[key].get<std::uint64_t>();
  }
  if (t.id.empty()) throw InvalidArgument("empty id");
  return t;
}

std::vector<RawRecord> read_jsonl(std::istream& in) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back({tweet_from_json(json::parse(line)), lineno});
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid json: ") + e.what(), lineno);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

// RFC 4180 reader; quoted fields may span lines. Returns false at EOF.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& lineno, std::size_t& start_line) {
  fields.clear();
  int c = in.peek();
  if (c == EOF) return false;
  ++lineno;
  start_line = lineno;
  std::string field;
  bool quoted = false;
  bool field_started_quoted = false;
  while ((c = in.get()) != EOF) {
    char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++lineno;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty() && !field_started_quoted) {
      quoted = true;
      field_started_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      field_started_quoted = false;
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') continue;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", start_line);
  fields.push_back(std::move(field));
  return true;
}

std::vector<RawRecord> read_csv(std::istream& in) {
  std::vector<RawRecord> out;
  std::vector<std::string> fields;
  std::size_t lineno = 0, start = 0;
  if (!read_csv_record(in, fields, lineno, start)) return out;
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < fields.size(); ++i) col[text::trim(fields[i])] = i;
  for (const char* key : {"id", "user_id", "text", "created_at"}) {
    if (!col.count(key)) throw ParseError(std::string("csv header lacks column '") + key + "'", 1);
  }
  while (read_csv_record(in, fields, lineno, start)) {
    if (fields.size() == 1 && text::trim(fields[0]).empty()) continue;
    if (fields.size() != col.size()) throw ParseError("expected " + std::to_string(col.size()) + " fields", start);
    try {
      Tweet t;
      t.id = fields[col["id"]];
      t.user_id = fields[col["user_id"]];
      t.text = fields[col["text"]];
      t.created_at = parse_iso8601(text::trim(fields[col["created_at"]]));
      if (col.count("retweet_count") && !fields[col["retweet_count"]].empty())
        t.retweet_count = parse_count(fields[col["retweet_count"]]);
      if (col.count("like_count") && !fields[col["like_count"]].empty())
        t.like_count = parse_count(fields[col["like_count"]]);
      if (t.id.empty()) throw InvalidArgument("empty id");
      out.push_back({std::move(t), start});
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), start);
    }
  }
  return out;
}

bool canonical_less(const Tweet& a, const Tweet& b) {
  if (a.created_at != b.created_at) return a.created_at < b.created_at;
  return a.id < b.id;
}

}  // namespace

Corpus Corpus::from_tweets(std::vector<Tweet> tweets) {
  Corpus c;
  std::unordered_set<std::string> seen;
  c.tweets_.reserve(tweets.size());
  for (auto& t : tweets) {
    if (!seen.insert(t.id).second) throw InvalidArgument("duplicate tweet id: " + t.id);
    if (text::normalize(t.text).empty()) {
      ++c.dropped_empty_;
      continue;
    }
    c.tweets_.push_back(std::move(t));
  }
  std::sort(c.tweets_.begin(), c.tweets_.end(), canonical_less);
  std::map<std::string, std::vector<std::string>> by_user;
  c.by_id_.reserve(c.tweets_.size());
  for (std::size_t i = 0; i < c.tweets_.size(); ++i) {
    c.by_id_.emplace(c.tweets_[i].id, i);
    by_user[c.tweets_[i].user_id].push_back(c.tweets_[i].id);
  }
  c.users_.reserve(by_user.size());
  for (auto& [uid, ids] : by_user) c.users_.push_back({uid, std::move(ids)});
  return c;
}

Corpus Corpus::ingest_stream(std::istream& in, CorpusFormat format) {
  std::vector<RawRecord> raw = format == CorpusFormat::csv ? read_csv(in) : read_jsonl(in);
  if (raw.empty()) throw ParseError("empty corpus file", 0);
  std::unordered_set<std::string> seen;
  std::vector<Tweet> tweets;
  tweets.reserve(raw.size());
  for (auto& r : raw) {
    if (!seen.insert(r.tweet.id).second) throw ParseError("duplicate tweet id '" + r.tweet.id + "'", r.line);
    tweets.push_back(std::move(r.tweet));
  }
  return from_tweets(std::move(tweets));
}

Corpus Corpus::ingest(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("corpus file not found: " + path.string());
  return ingest_stream(in, format);
}

const Tweet* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &tweets_[it->second];
}

const UserRecord* Corpus::find_user(std::string_view user_id) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user_id,
                             [](const UserRecord& u, std::string_view id) { return u.user_id < id; });
  return it != users_.end() && it->user_id == user_id ? &*it : nullptr;
}

std::vector<const Tweet*> Corpus::tweets_of(std::string_view user_id) const {
  std::vector<const Tweet*> out;
  if (const UserRecord* u = find_user(user_id)) {
    out.reserve(u->tweet_ids.size());
    for (const auto& id : u->tweet_ids) out.push_back(find(id));
  }
  return out;
}

Corpus Corpus::subset(const std::vector<std::string>& ids) const {
  std::vector<Tweet> kept;
  kept.reserve(ids.size());
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) continue;
    if (const Tweet* t = find(id)) kept.push_back(*t);
  }
  return from_tweets(std::move(kept));
}

void Corpus::write_jsonl(std::ostream& out) const {
  for (const auto& t : tweets_) {
    json obj = {{"id", t.id},
                {"user_id", t.user_id},
                {"text", t.text},
                {"created_at", format_iso8601(t.created_at)},
                {"retweet_count", t.retweet_count},
                {"like_count", t.like_count}};
    out << obj.dump() << '\n';
  }
}

void Corpus::write_jsonl(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_jsonl(out);
}

RetweetGraph RetweetGraph::from_edges(std::vector<RetweetEdge> edges, std::vector<std::string> extra_nodes) {
  std::map<std::pair<std::string, std::string>, double> merged;
  std::set<std::string> nodes(extra_nodes.begin(), extra_nodes.end());
  for (auto& e : edges) {
    if (e.source.empty() || e.target.empty()) throw InvalidArgument("edge endpoint is empty");
    if (!(e.weight >= 1.0)) throw InvalidArgument("edge weight must be >= 1");
    merged[{e.source, e.target}] += e.weight;
    nodes.insert(e.source);
    nodes.insert(e.target);
  }
  RetweetGraph g;
  g.nodes_.assign(nodes.begin(), nodes.end());
  g.edges_.reserve(merged.size());
  for (auto& [key, w] : merged) g.edges_.push_back({key.first, key.second, w});
  return g;
}

RetweetGraph RetweetGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("graph file not found: " + path.string());
  std::vector<RetweetEdge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      json obj = json::parse(line);
      RetweetEdge e{id_string(obj.at("source"), "source"), id_string(obj.at("target"), "target"),
                    obj.contains("weight") ? obj["weight"].get<double>() : 1.0};
      if (!(e.weight >= 1.0)) throw InvalidArgument("edge weight must be >= 1");
      edges.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid edge record: ") + e.what(), lineno);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return from_edges(std::move(edges));
}

std::vector<RetweetEdge> RetweetGraph::undirected_edges() const {
  std::map<std::pair<std::string, std::string>, double> merged;
  for (const auto& e : edges_) {
    auto key = e.source <= e.target ? std::pair{e.source, e.target} : std::pair{e.target, e.source};
    merged[key] += e.weight;
  }
  std::vector<RetweetEdge> out;
  out.reserve(merged.size());
  for (auto& [key, w] : merged) out.push_back({key.first, key.second, w});
  return out;
}

void RetweetGraph::write_jsonl(const std::filesystem::path& path) const {
  std::ostringstream ss;
  for (const auto& e : edges_) ss << json{{"source", e.source}, {"target", e.target}, {"weight", e.weight}}.dump() << '\n';
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << ss.str();
}

std::size_t OverlapCounts::at_least(unsigned mask) const {
  std::size_t n = 0;
  for (unsigned r = 0; r < regions.size(); ++r) {
    if ((r & mask) == mask) n += regions[r];
  }
  return n;
}

std::size_t OverlapCounts::matching_any() const {
  std::size_t n = 0;
  for (std::size_t r = 1; r < regions.size(); ++r) n += regions[r];
  return n;
}

namespace {

std::vector<std::string> normalized_keywords(const std::vector<std::string>& keywords) {
  std::vector<std::string> out;
  for (const auto& k : keywords) {
    auto n = text::normalize(k);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

bool matches_any(std::string_view normalized_text, const std::vector<std::string>& keywords) {
  return std::any_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return text::contains(normalized_text, k); });
}

}  // namespace

OverlapCounts candidate_overlap(const Corpus& corpus, const std::vector<std::vector<std::string>>& name_sets) {
  if (name_sets.size() < 2) throw InvalidArgument("candidate_overlap needs at least two name sets");
  if (name_sets.size() > 16) throw InvalidArgument("candidate_overlap supports at most 16 name sets");
  std::vector<std::vector<std::string>> sets;
  for (std::size_t i = 0; i < name_sets.size(); ++i) {
    sets.push_back(normalized_keywords(name_sets[i]));
    if (sets.back().empty()) throw InvalidArgument("name set " + std::to_string(i) + " is empty");
  }
  const auto& tweets = corpus.tweets();
  std::vector<unsigned> masks(tweets.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tweets.size()); ++i) {
    std::string norm = text::normalize(tweets[i].text);
    unsigned m = 0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      if (matches_any(norm, sets[s])) m |= 1u << s;
    }
    masks[i] = m;
  }
  OverlapCounts counts;
  counts.set_count = sets.size();
  counts.regions.assign(std::size_t{1} << sets.size(), 0);
  for (unsigned m : masks) ++counts.regions[m];
  return counts;
}

namespace {

GroupStats group_stats(const Corpus& corpus, const std::vector<std::string>& keywords) {
  GroupStats s;
  std::set<std::string> users;
  std::vector<double> lengths;
  for (const auto& t : corpus.tweets()) {
    if (!matches_any(text::normalize(t.text), keywords)) continue;
    ++s.tweets;
    users.insert(t.user_id);
    lengths.push_back(static_cast<double>(text::codepoint_length(t.text)));
  }
  s.users = users.size();
  if (s.tweets == 0) return s;
  s.avg_tweets_per_user = static_cast<double>(s.tweets) / static_cast<double>(s.users);
  double sum = 0.0;
  for (double l : lengths) sum += l;
  s.avg_text_length = sum / static_cast<double>(lengths.size());
  std::sort(lengths.begin(), lengths.end());
  std::size_t n = lengths.size();
  s.median_text_length = n % 2 ? lengths[n / 2] : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
  return s;
}

double pct_change(double before, double after) {
  if (before == 0.0) return 0.0;
  return (after - before) / before * 100.0;
}

}  // namespace

DeltaReport filter_deltas(const Corpus& before, const Corpus& after, const std::vector<KeywordGroup>& groups) {
  for (const auto& t : after.tweets()) {
    if (!before.find(t.id)) throw InvalidArgument("filtered corpus contains tweet " + t.id + " absent from the original");
  }
  DeltaReport report;
  for (const auto& g : groups) {
    auto keywords = normalized_keywords(g.keywords);
    if (keywords.empty()) throw InvalidArgument("group '" + g.name + "' has no keywords");
    GroupDelta d;
    d.group = g.name;
    d.before = group_stats(before, keywords);
    if (d.before.tweets == 0) throw InvalidArgument("group '" + g.name + "' has no tweets before filtering");
    d.after = group_stats(after, keywords);
    d.tweets_pct = pct_change(static_cast<double>(d.before.tweets), static_cast<double>(d.after.tweets));
    d.users_pct = pct_change(static_cast<double>(d.before.users), static_cast<double>(d.after.users));
    d.avg_tweets_per_user_pct = pct_change(d.before.avg_tweets_per_user, d.after.avg_tweets_per_user);
    d.avg_text_length_pct = pct_change(d.before.avg_text_length, d.after.avg_text_length);
    d.median_text_length_pct = pct_change(d.before.median_text_length, d.after.median_text_length);
    report.groups.push_back(std::move(d));
  }
  return report;
}

std::string DeltaReport::to_text() const {
  std::ostringstream ss;
  ss << std::left << std::setw(16) << "group" << std::right << std::setw(12) << "tweets%" << std::setw(12) << "users%"
     << std::setw(14) << "avg/user%" << std::setw(12) << "avg_len%" << std::setw(12) << "med_len%" << '\n';
  ss << std::fixed << std::setprecision(2);
  for (const auto& g : groups) {
    ss << std::left << std::setw(16) << g.group << std::right << std::setw(12) << g.tweets_pct << std::setw(12)
       << g.users_pct << std::setw(14) << g.avg_tweets_per_user_pct << std::setw(12) << g.avg_text_length_pct
       << std::setw(12) << g.median_text_length_pct << '\n';
  }
  return ss.str();
}

}  // namespace userprof
