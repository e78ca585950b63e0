#include "userprof/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/text.hpp"

namespace userprof {

Bm25Index Bm25Index::build(const std::vector<std::pair<std::string, std::string>>& docs, double k1, double b) {
  if (!(k1 >= 0.0) || !(b >= 0.0 && b <= 1.0)) throw InvalidArgument("BM25 needs k1 >= 0 and b in [0, 1]");
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return docs[a].first < docs[c].first; });
  Bm25Index idx;
  idx.k1_ = k1;
  idx.b_ = b;
  std::size_t total = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& [id, body] = docs[order[pos]];
    if (pos > 0 && idx.ids_.back() == id) throw InvalidArgument("duplicate document id: " + id);
    idx.ids_.push_back(id);
    auto tokens = text::word_tokens(body);
    idx.lengths_.push_back(tokens.size());
    total += tokens.size();
    std::map<std::string, std::size_t> tf;
    for (auto& t : tokens) ++tf[std::move(t)];
    for (auto& [term, count] : tf) idx.postings_[term].push_back({pos, count});
  }
  idx.avg_len_ = idx.ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(idx.ids_.size());
  return idx;
}

double Bm25Index::idf(const std::string& term) const {
  auto it = postings_.find(term);
  double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  double n = static_cast<double>(ids_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

std::vector<ScoredDoc> Bm25Index::rank(std::string_view query, std::size_t top) const {
  auto tokens = text::word_tokens(query);
  if (tokens.empty()) throw InvalidArgument("query has no tokens");
  std::set<std::string> terms(tokens.begin(), tokens.end());
  std::vector<double> score(ids_.size(), 0.0);
  std::vector<char> hit(ids_.size(), 0);
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    double w = idf(term);
    for (const auto& p : it->second) {
      double tf = static_cast<double>(p.tf);
      double norm = k1_ * (1.0 - b_ + b_ * static_cast<double>(lengths_[p.doc]) / avg_len_);
      score[p.doc] += w * tf * (k1_ + 1.0) / (tf + norm);
      hit[p.doc] = 1;
    }
  }
  std::vector<std::size_t> docs;
  for (std::size_t d = 0; d < ids_.size(); ++d) {
    if (hit[d] && score[d] > 0.0) docs.push_back(d);
  }
  auto less = [&](std::size_t a, std::size_t c) { return score[a] != score[c] ? score[a] > score[c] : a < c; };
  std::size_t k = std::min(top, docs.size());
  std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(k), docs.end(), less);
  std::vector<ScoredDoc> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids_[docs[i]], score[docs[i]]});
  return out;
}

std::vector<Neighbor> dense_rank(const VectorIndex& index, std::span<const double> statement_vec, std::size_t top) {
  return index.top_k(statement_vec, top);
}

std::vector<AspectSpec> read_aspects(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path));
  std::vector<AspectSpec> out;
  for (const auto& [sid, kws] : j.items()) {
    AspectSpec a{sid, kws.get<std::vector<std::string>>()};
    if (a.keywords.empty()) throw InvalidArgument("aspect " + sid + " has no keywords");
    out.push_back(std::move(a));
  }
  return out;
}

SemaeSelection semae_select(const EmbeddedSet& tweets, const std::vector<std::string>& texts, const AspectSpec& aspect,
                            std::size_t n) {
  if (aspect.keywords.empty()) throw InvalidArgument("aspect " + aspect.statement_id + " has no keywords");
  if (texts.size() != tweets.ids.size() || tweets.vectors.rows() != tweets.ids.size()) {
    throw InvalidArgument("tweets, texts and vectors are misaligned");
  }
  std::vector<std::string> keys;
  for (const auto& k : aspect.keywords) {
    auto nk = text::normalize(k);
    if (!nk.empty()) keys.push_back(std::move(nk));
  }
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto norm = text::normalize(texts[i]);
    if (std::any_of(keys.begin(), keys.end(), [&](const std::string& k) { return text::contains(norm, k); })) {
      matched.push_back(i);
    }
  }
  SemaeSelection out;
  if (matched.empty()) {
    out.warnings.push_back("no tweet matches the keywords of " + aspect.statement_id);
    return out;
  }
  Matrix sub;
  for (std::size_t i : matched) sub.append_row(tweets.vectors.row(i));
  Vector mean = mean_row(sub);
  bool degenerate = l2_norm(mean) == 0.0;
  std::vector<double> dist(matched.size(), 1.0);
  if (!degenerate) {
    for (std::size_t j = 0; j < matched.size(); ++j) dist[j] = tie_key(cosine_distance(sub.row(j), mean));
  }
  std::vector<std::size_t> order(matched.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] != dist[b] ? dist[a] < dist[b] : tweets.ids[matched[a]] < tweets.ids[matched[b]];
  });
  order.resize(std::min(n, order.size()));
  for (std::size_t j : order) out.ids.push_back(tweets.ids[matched[j]]);
  return out;
}

}  // namespace userprof
