#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "userprof/corpus.hpp"
#include "userprof/matrix.hpp"

namespace userprof {

/// Weighted undirected graph in adjacency-list form. A self-loop of weight w
/// is stored as a diagonal entry 2w so that node degree equals the row sum.
class WeightedGraph {
 public:
  struct Arc {
    std::size_t to;
    double weight;
  };

  static WeightedGraph from_retweets(const RetweetGraph& g);
  static WeightedGraph from_edges(std::vector<std::string> names,
                                  const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);

  std::size_t size() const noexcept { return adj_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Arc>& arcs(std::size_t u) const { return adj_[u]; }
  double degree(std::size_t u) const { return degree_[u]; }
  /// Sum of all degrees (2m).
  double total_weight() const noexcept { return total_; }

 private:
  friend class LouvainRunner;
  std::vector<std::string> names_;
  std::vector<std::vector<Arc>> adj_;
  std::vector<double> degree_;
  double total_ = 0.0;
};

/// Q = 1/(2m) * sum_ij [A_ij - gamma * k_i k_j / (2m)] * delta(c_i, c_j); 0 for an edgeless graph.
double modularity(const WeightedGraph& g, const std::vector<std::size_t>& community, double resolution = 1.0);

struct Partition {
  std::map<std::string, std::size_t> assignment;  // user id -> community id
  double modularity = 0.0;
  std::vector<double> level_modularity;  // after each aggregation round

  std::size_t community_count() const;
  std::string to_json() const;
};

/// Two-phase Louvain: local moves in a seeded node order until no move
/// improves modularity, then aggregation; repeated until a level makes no move.
/// Community ids are renumbered by first appearance in node-name order.
Partition louvain(const RetweetGraph& graph, double resolution, std::uint64_t seed);
Partition louvain(const WeightedGraph& graph, double resolution, std::uint64_t seed);

struct SampleSpec {
  double top_community_fraction = 0.2;
  double user_fraction = 0.1;
  std::uint64_t seed = 123;

  void validate() const;
};

/// Takes the ceil(top_fraction * C) largest communities (ties by smaller id) and
/// samples ceil(user_fraction * size) members of each with one seeded generator.
std::vector<std::string> sample_users(const Partition& partition, const SampleSpec& spec);

struct PopulationSplit {
  std::vector<std::string> statement_split;
  std::vector<std::string> profile_split;
  std::size_t clusters = 0;
};

/// Stratified split over k-means clusters of per-user vectors (k from elbow_k,
/// capped at `k_max`). Each cluster contributes proportionally to both splits.
PopulationSplit split_population(const std::vector<std::string>& users, const Matrix& user_vectors,
                                 std::size_t n_statement, std::size_t n_profile, std::uint64_t seed,
                                 std::size_t k_max = 10);

}  // namespace userprof
