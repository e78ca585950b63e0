#include "userprof/community.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "userprof/clustering.hpp"
#include "userprof/error.hpp"
#include "userprof/random.hpp"

namespace userprof {

WeightedGraph WeightedGraph::from_edges(std::vector<std::string> names,
                                        const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
  WeightedGraph g;
  g.names_ = std::move(names);
  g.adj_.resize(g.names_.size());
  g.degree_.assign(g.names_.size(), 0.0);
  for (auto [a, b, w] : edges) {
    if (a >= g.size() || b >= g.size()) throw InvalidArgument("edge endpoint out of range");
    if (a == b) {
      g.adj_[a].push_back({a, 2.0 * w});
      g.degree_[a] += 2.0 * w;
    } else {
      g.adj_[a].push_back({b, w});
      g.adj_[b].push_back({a, w});
      g.degree_[a] += w;
      g.degree_[b] += w;
    }
  }
  g.total_ = std::accumulate(g.degree_.begin(), g.degree_.end(), 0.0);
  return g;
}

WeightedGraph WeightedGraph::from_retweets(const RetweetGraph& rg) {
  std::vector<std::string> names = rg.nodes();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  for (const auto& e : rg.undirected_edges()) edges.emplace_back(index.at(e.source), index.at(e.target), e.weight);
  return from_edges(std::move(names), edges);
}

double modularity(const WeightedGraph& g, const std::vector<std::size_t>& community, double resolution) {
  const double m2 = g.total_weight();
  if (m2 == 0.0) return 0.0;
  if (community.size() != g.size()) throw InvalidArgument("community vector does not cover the graph");
  std::size_t c_max = community.empty() ? 0 : *std::max_element(community.begin(), community.end());
  std::vector<double> tot(c_max + 1, 0.0);
  double inside = 0.0;
  for (std::size_t u = 0; u < g.size(); ++u) {
    tot[community[u]] += g.degree(u);
    for (const auto& a : g.arcs(u)) {
      if (community[a.to] == community[u]) inside += a.weight;
    }
  }
  double expected = 0.0;
  for (double t : tot) expected += (t / m2) * (t / m2);
  return inside / m2 - resolution * expected;
}

std::size_t Partition::community_count() const {
  std::set<std::size_t> ids;
  for (const auto& [u, c] : assignment) ids.insert(c);
  return ids.size();
}

std::string Partition::to_json() const {
  nlohmann::json j;
  j["assignment"] = assignment;
  j["modularity"] = modularity;
  j["level_modularity"] = level_modularity;
  return j.dump(2);
}

// Local-moving and aggregation phases over successive coarsened graphs.
class LouvainRunner {
 public:
  LouvainRunner(const WeightedGraph& g, double resolution, std::uint64_t seed)
      : original_(g), resolution_(resolution), rng_(seed) {}

  Partition run() {
    const std::size_t n = original_.size();
    std::vector<std::size_t> membership(n);
    std::iota(membership.begin(), membership.end(), std::size_t{0});
    Partition p;
    if (original_.total_weight() > 0.0) {
      WeightedGraph level = original_;
      while (true) {
        std::vector<std::size_t> comm = local_moves(level);
        std::size_t communities = renumber(comm);
        if (communities == level.size()) break;
        for (auto& m : membership) m = comm[m];
        p.level_modularity.push_back(modularity(original_, membership, resolution_));
        level = aggregate(level, comm, communities);
      }
    }
    renumber(membership);
    for (std::size_t u = 0; u < n; ++u) p.assignment[original_.names()[u]] = membership[u];
    p.modularity = modularity(original_, membership, resolution_);
    return p;
  }

 private:
  std::vector<std::size_t> local_moves(const WeightedGraph& g) {
    const std::size_t n = g.size();
    const double m2 = g.total_weight();
    std::vector<std::size_t> comm(n);
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    std::vector<double> tot(n);
    for (std::size_t u = 0; u < n; ++u) tot[u] = g.degree(u);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_.shuffle(order);

    std::vector<double> link(n, 0.0);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> touched;
    constexpr double kEps = 1e-12;
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t u : order) {
        const std::size_t cu = comm[u];
        const double ku = g.degree(u);
        touched.clear();
        touched.push_back(cu);
        seen[cu] = 1;
        for (const auto& a : g.arcs(u)) {
          if (a.to == u) continue;
          std::size_t c = comm[a.to];
          if (!seen[c]) {
            seen[c] = 1;
            touched.push_back(c);
          }
          link[c] += a.weight;
        }
        tot[cu] -= ku;
        std::size_t best = cu;
        double best_gain = link[cu] - resolution_ * tot[cu] * ku / m2;
        for (std::size_t c : touched) {
          if (c == cu) continue;
          double gain = link[c] - resolution_ * tot[c] * ku / m2;
          if (gain > best_gain + kEps || (std::abs(gain - best_gain) <= kEps && best != cu && c < best)) {
            best = c;
            best_gain = gain;
          }
        }
        tot[best] += ku;
        comm[u] = best;
        if (best != cu) improved = true;
        for (std::size_t c : touched) {
          link[c] = 0.0;
          seen[c] = 0;
        }
      }
    }
    return comm;
  }

  // Relabels to 0..C-1 in order of first appearance; returns C.
  static std::size_t renumber(std::vector<std::size_t>& comm) {
    std::vector<std::size_t> map(comm.size() + 1, SIZE_MAX);
    std::size_t next = 0;
    for (auto& c : comm) {
      if (c >= map.size()) map.resize(c + 1, SIZE_MAX);
      if (map[c] == SIZE_MAX) map[c] = next++;
      c = map[c];
    }
    return next;
  }

  static WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::size_t>& comm, std::size_t count) {
    std::vector<std::map<std::size_t, double>> acc(count);
    for (std::size_t u = 0; u < g.size(); ++u) {
      for (const auto& a : g.arcs(u)) acc[comm[u]][comm[a.to]] += a.weight;
    }
    WeightedGraph out;
    out.names_.resize(count);
    out.adj_.resize(count);
    out.degree_.assign(count, 0.0);
    for (std::size_t c = 0; c < count; ++c) {
      for (auto [d, w] : acc[c]) {
        out.adj_[c].push_back({d, w});
        out.degree_[c] += w;
      }
    }
    out.total_ = std::accumulate(out.degree_.begin(), out.degree_.end(), 0.0);
    return out;
  }

  const WeightedGraph& original_;
  double resolution_;
  Rng rng_;
};

Partition louvain(const WeightedGraph& graph, double resolution, std::uint64_t seed) {
  if (graph.size() == 0) throw InvalidArgument("louvain needs a non-empty graph");
  if (!(resolution > 0.0)) throw InvalidArgument("resolution must be positive");
  return LouvainRunner(graph, resolution, seed).run();
}

Partition louvain(const RetweetGraph& graph, double resolution, std::uint64_t seed) {
  return louvain(WeightedGraph::from_retweets(graph), resolution, seed);
}

void SampleSpec::validate() const {
  auto ok = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!ok(top_community_fraction) || !ok(user_fraction)) throw InvalidArgument("sampling fractions must lie in (0, 1]");
}

namespace {

std::size_t ceil_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace

std::vector<std::string> sample_users(const Partition& partition, const SampleSpec& spec) {
  spec.validate();
  std::map<std::size_t, std::vector<std::string>> members;
  for (const auto& [user, c] : partition.assignment) members[c].push_back(user);
  std::vector<std::pair<std::size_t, const std::vector<std::string>*>> ranked;
  for (const auto& [c, m] : members) ranked.emplace_back(c, &m);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second->size() > b.second->size(); });
  std::size_t top = std::min(ranked.size(), ceil_count(spec.top_community_fraction, ranked.size()));
  Rng rng(spec.seed);
  std::vector<std::string> out;
  for (std::size_t r = 0; r < top; ++r) {
    const auto& m = *ranked[r].second;
    for (std::size_t i : rng.sample_indices(m.size(), ceil_count(spec.user_fraction, m.size()))) out.push_back(m[i]);
  }
  return out;
}

PopulationSplit split_population(const std::vector<std::string>& users, const Matrix& user_vectors,
                                 std::size_t n_statement, std::size_t n_profile, std::uint64_t seed,
                                 std::size_t k_max) {
  if (users.size() != user_vectors.rows()) throw InvalidArgument("users and vectors are misaligned");
  if (n_statement + n_profile > users.size()) {
    throw InvalidArgument("split needs " + std::to_string(n_statement + n_profile) + " users but only " +
                          std::to_string(users.size()) + " are available");
  }
  PopulationSplit out;
  std::size_t k = elbow_k(user_vectors, 2, k_max, seed);
  std::vector<std::size_t> assignment(users.size(), 0);
  if (k > 1) assignment = kmeans(user_vectors, k, seed).assignment;
  out.clusters = k;

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < users.size(); ++i) members[assignment[i]].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& m : members) sizes.push_back(m.size());
  auto s_quota = allocate_quotas(sizes, n_statement);
  std::vector<std::size_t> spare(k);
  for (std::size_t c = 0; c < k; ++c) spare[c] = sizes[c] - s_quota[c];
  // Profile quotas stay proportional to cluster size but fit the remaining members.
  std::vector<std::size_t> p_quota(k, 0);
  {
    std::vector<double> w(sizes.begin(), sizes.end());
    std::size_t total = n_profile;
    std::vector<double> frac(k);
    std::size_t assigned = 0;
    double wsum = static_cast<double>(users.size());
    for (std::size_t c = 0; c < k; ++c) {
      double exact = w[c] / wsum * static_cast<double>(total);
      auto fl = static_cast<std::size_t>(std::floor(exact + 1e-9));
      p_quota[c] = std::min(fl, spare[c]);
      frac[c] = exact - static_cast<double>(fl);
      assigned += p_quota[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    while (assigned < total) {
      for (std::size_t c : order) {
        if (assigned == total) break;
        if (p_quota[c] < spare[c]) {
          ++p_quota[c];
          ++assigned;
        }
      }
    }
  }

  Rng rng(seed);
  for (std::size_t c = 0; c < k; ++c) {
    auto picks = rng.sample_indices(members[c].size(), s_quota[c] + p_quota[c]);
    for (std::size_t j = 0; j < picks.size(); ++j) {
      const auto& u = users[members[c][picks[j]]];
      (j < s_quota[c] ? out.statement_split : out.profile_split).push_back(u);
    }
  }
  std::sort(out.statement_split.begin(), out.statement_split.end());
  std::sort(out.profile_split.begin(), out.profile_split.end());
  return out;
}

}  // namespace userprof
