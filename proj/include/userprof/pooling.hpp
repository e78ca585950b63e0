#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "userprof/embedding.hpp"

namespace userprof {

struct PoolingConfig {
  std::size_t n_select = 20;
  double initial_threshold = 0.9;
  double decay_alpha = 0.02;
  double decay_floor = 0.5;
  std::uint64_t seed = 123;
  std::size_t k_max = 10;

  void validate() const;
  /// Similarity threshold in force at selection `iteration` (0-based):
  /// max(decay_floor, initial_threshold - decay_alpha * ln(1 + iteration)).
  double threshold_at(std::size_t iteration) const;
};

enum class PoolMethod { random, mean_nearest, stratified_kmeans, iterative_elimination };

const char* to_string(PoolMethod m);
PoolMethod pool_method_from_string(std::string_view s);

/// Up to 4 * n_select tweet ids with the methods that contributed each one.
struct UserPool {
  std::string user_id;
  std::vector<std::string> tweet_ids;
  std::map<std::string, std::set<PoolMethod>> provenance;
};

/// Seeded uniform sample without replacement, in draw order.
std::vector<std::string> pool_random(const std::vector<std::string>& ids, std::size_t n, std::uint64_t seed);

/// n tweets nearest (cosine) to the mean embedding; ties by id.
std::vector<std::string> pool_mean_nearest(const EmbeddedSet& tweets, std::size_t n);

/// Stratified sample over k-means clusters (k from elbow_k); quotas from allocate_quotas.
std::vector<std::string> pool_stratified_kmeans(const EmbeddedSet& tweets, std::size_t n, std::uint64_t seed,
                                                std::size_t k_max = 10);

struct IterativeSelection {
  std::vector<std::string> ids;
  std::vector<double> thresholds;  // threshold applied at each selection step
  std::size_t refilled = 0;        // ids added from eliminated candidates
};

/// Iterative elimination: walk tweets in descending similarity to the mean,
/// keep the top unchecked tweet, drop unchecked tweets at least `threshold`
/// similar to it, decay the threshold; refill from eliminated candidates in
/// their original order when fewer than n_select were kept.
IterativeSelection pool_iterative_elimination(const EmbeddedSet& tweets, const PoolingConfig& cfg);

/// Union of the four methods' picks (n_select each), deduplicated.
UserPool assemble_pool(const std::string& user_id, const EmbeddedSet& tweets, const PoolingConfig& cfg);

void write_pools_jsonl(const std::filesystem::path& path, const std::vector<UserPool>& pools);
std::vector<UserPool> read_pools_jsonl(const std::filesystem::path& path);

}  // namespace userprof
