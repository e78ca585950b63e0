#include "userprof/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "userprof/error.hpp"
#include "userprof/random.hpp"

namespace userprof {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void copy_row(const Matrix& src, std::size_t i, Matrix& dst, std::size_t j) {
  auto s = src.row(i);
  std::copy(s.begin(), s.end(), dst.row(j).begin());
}

std::vector<std::size_t> allocate_capped(const std::vector<double>& weights, const std::vector<std::size_t>& caps,
                                         std::size_t total) {
  const std::size_t n = weights.size();
  std::size_t capacity = std::accumulate(caps.begin(), caps.end(), std::size_t{0});
  total = std::min(total, capacity);
  std::vector<std::size_t> quota(n, 0);
  double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total == 0 || wsum <= 0.0) return quota;
  std::vector<double> frac(n, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double exact = weights[i] / wsum * static_cast<double>(total);
    auto fl = static_cast<std::size_t>(std::floor(exact + 1e-9));
    quota[i] = std::min(fl, caps[i]);
    frac[i] = quota[i] < fl ? 0.0 : exact - static_cast<double>(fl);
    assigned += quota[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Largest remainders first; further passes cover strata saturated by caps.
  while (assigned < total) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (assigned == total) break;
      if (quota[i] < caps[i]) {
        ++quota[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return quota;
}

}  // namespace

std::vector<std::size_t> allocate_quotas(const std::vector<std::size_t>& sizes, std::size_t total) {
  std::vector<double> w(sizes.begin(), sizes.end());
  return allocate_capped(w, sizes, total);
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.rows();
  if (k == 0 || k > n) throw InvalidArgument("kmeans needs 1 <= k <= number of points");
  KMeansResult r;
  r.centers = Matrix(k, points.cols());
  Rng rng(seed);
  copy_row(points, rng.uniform_index(n), r.centers, 0);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d[i] = std::min(min_d[i], squared_distance(points.row(i), r.centers.row(c - 1)));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    copy_row(points, best, r.centers, c);
  }

  r.assignment.assign(n, 0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < 100; ++it) {
    r.iterations = it + 1;
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d = squared_distance(points.row(i), r.centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      r.assignment[i] = best;
      wcss += best_d;
    }
    r.wcss = wcss;
    if (wcss == 0.0 || (std::isfinite(prev) && std::abs(prev - wcss) <= 1e-6 * prev)) break;
    prev = wcss;
    Matrix sums(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(r.assignment[i]);
      auto p = points.row(i);
      for (std::size_t j = 0; j < p.size(); ++j) s[j] += p[j];
      ++counts[r.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto s = sums.row(c);
      auto dst = r.centers.row(c);
      for (std::size_t j = 0; j < s.size(); ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  return r;
}

std::size_t elbow_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed) {
  const std::size_t n = points.rows();
  if (n < 4) return 1;
  bool identical = true;
  for (std::size_t i = 1; i < n && identical; ++i) identical = squared_distance(points.row(0), points.row(i)) == 0.0;
  if (identical) return 1;
  if (k_min == 0) k_min = 1;
  std::size_t upper = std::min({k_max, std::max(n / 5, k_min), n});
  if (upper <= k_min) return std::min(k_min, n);

  const std::size_t count = upper - k_min + 1;
  std::vector<double> wcss(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    wcss[static_cast<std::size_t>(i)] = kmeans(points, k_min + static_cast<std::size_t>(i), seed).wcss;
  }
  double first = wcss.front(), last = wcss.back();
  if (!(first > last)) return k_min;
  std::size_t best = k_min;
  double best_gap = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double x = static_cast<double>(i) / static_cast<double>(count - 1);
    double y = (wcss[i] - last) / (first - last);
    // Distance below the chord from (0, 1) to (1, 0), up to the constant 1/sqrt(2).
    double gap = 1.0 - x - y;
    if (gap > best_gap + 1e-12) {
      best_gap = gap;
      best = k_min + i;
    }
  }
  return best;
}

}  // namespace userprof
