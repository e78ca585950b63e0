#pragma once

// Straight-line reference computations used as test oracles. They share no
// code with the library beyond tokenization and the seeded generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "userprof/random.hpp"
#include "userprof/text.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec unit(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  Vec out(v);
  for (double& x : out) x /= std::sqrt(s);
  return out;
}

inline double cos_dist(const Vec& a, const Vec& b) {
  Vec ua = unit(a), ub = unit(b);
  double d = 0.0;
  for (std::size_t i = 0; i < ua.size(); ++i) d += ua[i] * ub[i];
  return 1.0 - d;
}

struct Hit {
  std::string id;
  double distance;
};

/// Every distance computed, then fully sorted by (distance on a 1e-12 grid, id).
inline std::vector<Hit> knn(const std::vector<std::pair<std::string, Vec>>& items, const Vec& q, std::size_t k) {
  std::vector<Hit> all;
  for (const auto& [id, v] : items) all.push_back({id, cos_dist(q, v)});
  auto grid = [](double d) { return std::round(d * 1e12); };
  std::sort(all.begin(), all.end(), [&](const Hit& a, const Hit& b) {
    return grid(a.distance) != grid(b.distance) ? grid(a.distance) < grid(b.distance) : a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

enum Band { non_domain = 0, domain = 1, borderline = 2 };

struct Eq1 {
  double mean;
  Band band;
};

/// All-pairs distances to the chunks, k smallest averaged, banded by theta.
inline Eq1 eq1(const Vec& tweet, const std::vector<Vec>& chunks, std::size_t k, double theta) {
  std::vector<double> d;
  for (const auto& c : chunks) d.push_back(cos_dist(tweet, c));
  std::sort(d.begin(), d.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += d[i];
  double mean = sum / static_cast<double>(k);
  Band b = borderline;
  if (mean < 1.0 - theta) b = domain;
  if (mean > theta) b = non_domain;
  return {mean, b};
}

/// Okapi BM25 evaluated term by term over the tokenized documents.
inline std::vector<std::pair<std::string, double>> bm25(const std::vector<std::pair<std::string, std::string>>& docs,
                                                        const std::string& query, double k1 = 1.2, double b = 0.75) {
  std::vector<std::vector<std::string>> toks;
  double total = 0.0;
  for (const auto& d : docs) {
    toks.push_back(userprof::text::word_tokens(d.second));
    total += static_cast<double>(toks.back().size());
  }
  const double n = static_cast<double>(docs.size());
  const double avg = total / n;
  auto qt = userprof::text::word_tokens(query);
  std::set<std::string> terms(qt.begin(), qt.end());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0.0;
    bool any = false;
    for (const auto& t : terms) {
      double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
      if (tf == 0.0) continue;
      any = true;
      double df = 0.0;
      for (const auto& dt : toks) df += std::find(dt.begin(), dt.end(), t) != dt.end() ? 1.0 : 0.0;
      double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      double len = static_cast<double>(toks[i].size());
      score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
    }
    if (any) out.emplace_back(docs[i].first, score);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });
  return out;
}

/// Newman modularity from a dense adjacency matrix (self-loops count twice on the diagonal).
inline double modularity(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges,
                         const std::vector<std::size_t>& comm, double gamma = 1.0) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (auto [u, v, w] : edges) {
    if (u == v) {
      a[u][u] += 2.0 * w;
    } else {
      a[u][v] += w;
      a[v][u] += w;
    }
  }
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
    two_m += k[i];
  }
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (comm[i] == comm[j]) q += a[i][j] - gamma * k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

/// Best modularity over every set partition of n nodes (restricted growth strings).
inline double best_modularity_exhaustive(std::size_t n,
                                         const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges) {
  std::vector<std::size_t> rgs(n, 0);
  double best = -1.0;
  while (true) {
    best = std::max(best, modularity(n, edges, rgs));
    std::size_t i = n;
    bool advanced = false;
    while (i-- > 1) {
      std::size_t mx = *std::max_element(rgs.begin(), rgs.begin() + static_cast<long>(i));
      if (rgs[i] <= mx) {
        ++rgs[i];
        std::fill(rgs.begin() + static_cast<long>(i) + 1, rgs.end(), 0);
        advanced = true;
        break;
      }
    }
    if (!advanced) break;
  }
  return best;
}

/// Step-by-step simulation of iterative elimination with a decaying threshold.
inline std::vector<std::string> iterative_elimination(const std::vector<std::string>& ids, const std::vector<Vec>& vecs,
                                                      std::size_t n_select, double init, double alpha, double floor) {
  const std::size_t n = ids.size();
  Vec mean(vecs[0].size(), 0.0);
  for (const auto& v : vecs) {
    for (std::size_t d = 0; d < v.size(); ++d) mean[d] += v[d] / static_cast<double>(n);
  }
  std::vector<double> sim(n);
  for (std::size_t i = 0; i < n; ++i) sim[i] = std::round((1.0 - cos_dist(vecs[i], mean)) * 1e12);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return sim[a] != sim[b] ? sim[a] > sim[b] : ids[a] < ids[b]; });

  std::vector<std::size_t> remaining = order;
  std::vector<bool> taken(n, false);
  std::vector<std::string> out;
  std::size_t step = 0;
  while (out.size() < n_select && !remaining.empty()) {
    double threshold = init - alpha * std::log(1.0 + static_cast<double>(step));
    if (threshold < floor) threshold = floor;
    std::size_t pick = remaining[0];
    taken[pick] = true;
    out.push_back(ids[pick]);
    std::vector<std::size_t> next;
    for (std::size_t r = 1; r < remaining.size(); ++r) {
      if (1.0 - cos_dist(vecs[pick], vecs[remaining[r]]) < threshold) next.push_back(remaining[r]);
    }
    remaining = next;
    ++step;
  }
  for (std::size_t i : order) {
    if (out.size() >= n_select) break;
    if (!taken[i]) {
      taken[i] = true;
      out.push_back(ids[i]);
    }
  }
  return out;
}

/// Per-class F1 averaged over classes present in gold or predictions.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
  std::set<int> classes(pred.begin(), pred.end());
  classes.insert(gold.begin(), gold.end());
  double sum = 0.0;
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    sum += f1;
  }
  return sum / static_cast<double>(classes.size());
}

/// Two-sided exact binomial p for McNemar discordant counts.
inline double binomial_two_sided(std::size_t b, std::size_t c) {
  std::size_t n = b + c;
  if (n == 0) return 1.0;
  std::size_t k = std::min(b, c);
  double tail = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    double log_choose = std::lgamma(double(n) + 1) - std::lgamma(double(i) + 1) - std::lgamma(double(n - i) + 1);
    tail += std::exp(log_choose - double(n) * std::log(2.0));
  }
  return std::min(1.0, 2.0 * tail);
}

/// Kappa from a square agreement table (rows annotator 1, columns annotator 2).
inline double kappa_from_table(const std::vector<std::vector<double>>& t) {
  double n = 0.0, agree = 0.0;
  std::size_t m = t.size();
  std::vector<double> rows(m, 0.0), cols(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      n += t[i][j];
      rows[i] += t[i][j];
      cols[j] += t[i][j];
    }
    agree += t[i][i];
  }
  double po = agree / n, pe = 0.0;
  for (std::size_t i = 0; i < m; ++i) pe += rows[i] * cols[i] / (n * n);
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

struct Interval {
  double lower, point, upper;
};

/// Percentile bootstrap of macro-F1 with linear-interpolation quantiles.
inline Interval bootstrap(const std::vector<int>& pred, const std::vector<int>& gold, std::size_t resamples,
                          double level, std::uint64_t seed) {
  userprof::Rng rng(seed);
  const std::size_t n = pred.size();
  std::vector<double> stats;
  for (std::size_t r = 0; r < resamples; ++r) {
    std::vector<int> p, g;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = rng.uniform_index(n);
      p.push_back(pred[j]);
      g.push_back(gold[j]);
    }
    stats.push_back(macro_f1(p, g));
  }
  std::sort(stats.begin(), stats.end());
  auto q = [&](double f) {
    double pos = f * double(stats.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, stats.size() - 1);
    return stats[lo] + (stats[hi] - stats[lo]) * (pos - double(lo));
  };
  double point = macro_f1(pred, gold);
  double a = (1.0 - level) / 2.0;
  return {std::min(q(a), point), point, std::max(q(1.0 - a), point)};
}

}  // namespace oracle
