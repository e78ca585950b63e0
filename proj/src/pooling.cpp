#include "userprof/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "userprof/clustering.hpp"
#include "userprof/error.hpp"
#include "userprof/random.hpp"
#include "userprof/text.hpp"
#include "userprof/vector_index.hpp"

namespace userprof {

using json = nlohmann::json;

void PoolingConfig::validate() const {
  if (n_select == 0) throw InvalidArgument("n_select must be positive");
  if (!(initial_threshold > 0.0 && initial_threshold <= 1.0)) throw InvalidArgument("initial_threshold must lie in (0, 1]");
  if (!(decay_alpha > 0.0)) throw InvalidArgument("decay_alpha must be positive");
  if (!(decay_floor < initial_threshold)) throw InvalidArgument("decay_floor must be below initial_threshold");
}

double PoolingConfig::threshold_at(std::size_t iteration) const {
  return std::max(decay_floor, initial_threshold - decay_alpha * std::log1p(static_cast<double>(iteration)));
}

const char* to_string(PoolMethod m) {
  switch (m) {
    case PoolMethod::random: return "random";
    case PoolMethod::mean_nearest: return "mean_nearest";
    case PoolMethod::stratified_kmeans: return "stratified_kmeans";
    case PoolMethod::iterative_elimination: return "iterative_elimination";
  }
  return "random";
}

PoolMethod pool_method_from_string(std::string_view s) {
  for (auto m : {PoolMethod::random, PoolMethod::mean_nearest, PoolMethod::stratified_kmeans,
                 PoolMethod::iterative_elimination}) {
    if (s == to_string(m)) return m;
  }
  throw InvalidArgument("unknown pooling method: " + std::string(s));
}

std::vector<std::string> pool_random(const std::vector<std::string>& ids, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i : rng.sample_indices(ids.size(), n)) out.push_back(ids[i]);
  return out;
}

namespace {

// Cosine similarity of each row to the mean; 0 everywhere if the mean vanishes.
std::vector<double> similarity_to_mean(const EmbeddedSet& tweets) {
  Vector mean = mean_row(tweets.vectors);
  std::vector<double> sim(tweets.vectors.rows(), 0.0);
  if (l2_norm(mean) == 0.0) return sim;
  for (std::size_t i = 0; i < sim.size(); ++i) sim[i] = cosine_similarity(tweets.vectors.row(i), mean);
  return sim;
}

// Row indices by descending similarity to the mean, ties by id.
std::vector<std::size_t> mean_order(const EmbeddedSet& tweets) {
  auto sim = similarity_to_mean(tweets);
  for (double& s : sim) s = tie_key(s);
  std::vector<std::size_t> order(sim.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sim[a] != sim[b] ? sim[a] > sim[b] : tweets.ids[a] < tweets.ids[b];
  });
  return order;
}

void check_aligned(const EmbeddedSet& tweets) {
  if (tweets.ids.size() != tweets.vectors.rows()) throw InvalidArgument("ids and vectors are misaligned");
}

}  // namespace

std::vector<std::string> pool_mean_nearest(const EmbeddedSet& tweets, std::size_t n) {
  check_aligned(tweets);
  if (tweets.ids.empty()) throw InvalidArgument("pool_mean_nearest needs at least one tweet");
  auto order = mean_order(tweets);
  order.resize(std::min(n, order.size()));
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(tweets.ids[i]);
  return out;
}

std::vector<std::string> pool_stratified_kmeans(const EmbeddedSet& tweets, std::size_t n, std::uint64_t seed,
                                                std::size_t k_max) {
  check_aligned(tweets);
  if (tweets.ids.empty()) return {};
  std::size_t k = elbow_k(tweets.vectors, 2, k_max, seed);
  if (k <= 1) return pool_random(tweets.ids, n, seed);
  auto clusters = kmeans(tweets.vectors, k, seed);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < clusters.assignment.size(); ++i) members[clusters.assignment[i]].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& m : members) sizes.push_back(m.size());
  auto quotas = allocate_quotas(sizes, n);
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j : rng.sample_indices(members[c].size(), quotas[c])) out.push_back(tweets.ids[members[c][j]]);
  }
  return out;
}

IterativeSelection pool_iterative_elimination(const EmbeddedSet& tweets, const PoolingConfig& cfg) {
  cfg.validate();
  check_aligned(tweets);
  IterativeSelection out;
  if (tweets.ids.empty()) return out;
  const auto order = mean_order(tweets);
  std::vector<std::size_t> unchecked = order;
  std::vector<char> selected(tweets.ids.size(), 0);
  std::size_t iteration = 0;
  while (out.ids.size() < cfg.n_select && !unchecked.empty()) {
    double threshold = cfg.threshold_at(iteration);
    out.thresholds.push_back(threshold);
    std::size_t current = unchecked.front();
    unchecked.erase(unchecked.begin());
    selected[current] = 1;
    out.ids.push_back(tweets.ids[current]);
    auto cur = tweets.vectors.row(current);
    std::erase_if(unchecked, [&](std::size_t j) { return cosine_similarity(cur, tweets.vectors.row(j)) >= threshold; });
    ++iteration;
  }
  for (std::size_t i : order) {
    if (out.ids.size() >= cfg.n_select) break;
    if (selected[i]) continue;
    selected[i] = 1;
    out.ids.push_back(tweets.ids[i]);
    ++out.refilled;
  }
  return out;
}

UserPool assemble_pool(const std::string& user_id, const EmbeddedSet& tweets, const PoolingConfig& cfg) {
  cfg.validate();
  check_aligned(tweets);
  if (tweets.ids.empty()) throw InvalidArgument("user " + user_id + " has no tweets to pool");
  UserPool pool;
  pool.user_id = user_id;
  auto add = [&](const std::vector<std::string>& ids, PoolMethod m) {
    for (const auto& id : ids) {
      auto [it, fresh] = pool.provenance.try_emplace(id);
      if (fresh) pool.tweet_ids.push_back(id);
      it->second.insert(m);
    }
  };
  add(pool_random(tweets.ids, cfg.n_select, cfg.seed), PoolMethod::random);
  add(pool_mean_nearest(tweets, cfg.n_select), PoolMethod::mean_nearest);
  add(pool_stratified_kmeans(tweets, cfg.n_select, cfg.seed, cfg.k_max), PoolMethod::stratified_kmeans);
  add(pool_iterative_elimination(tweets, cfg).ids, PoolMethod::iterative_elimination);
  return pool;
}

void write_pools_jsonl(const std::filesystem::path& path, const std::vector<UserPool>& pools) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pools) {
    json prov = json::object();
    for (const auto& [id, methods] : p.provenance) {
      json arr = json::array();
      for (auto m : methods) arr.push_back(to_string(m));
      prov[id] = arr;
    }
    out << json{{"user_id", p.user_id}, {"tweet_ids", p.tweet_ids}, {"provenance", prov}}.dump() << '\n';
  }
}

std::vector<UserPool> read_pools_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("pool file not found: " + path.string());
  std::vector<UserPool> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      json obj = json::parse(line);
      UserPool p;
      p.user_id = obj.at("user_id").get<std::string>();
      p.tweet_ids = obj.at("tweet_ids").get<std::vector<std::string>>();
      for (const auto& [id, arr] : obj.at("provenance").items()) {
        for (const auto& m : arr) p.provenance[id].insert(pool_method_from_string(m.get<std::string>()));
      }
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid pool record: ") + e.what(), lineno);
    }
  }
  return out;
}

}  // namespace userprof
