#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "userprof/matrix.hpp"

namespace userprof {

struct KMeansResult {
  std::vector<std::size_t> assignment;  // cluster per row
  Matrix centers;
  double wcss = 0.0;  // within-cluster sum of squared Euclidean distances
  std::size_t iterations = 0;
};

/// Lloyd's k-means with seeded farthest-point initialization: the first
/// center is a seeded random row, each further center is the row farthest
/// from the chosen ones (lowest index on ties). At most 100 iterations; stops
/// when WCSS changes by less than 1e-6 relative. Requires 1 <= k <= rows.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed);

/// Chooses k by the elbow of the WCSS curve over [k_min, upper], where
/// upper = min(k_max, max(n / 5, k_min)): both axes are rescaled to [0, 1]
/// and the k farthest from the chord joining the curve's end points wins
/// (smallest k on ties). Returns 1 for fewer than 4 points or when all
/// points coincide.
std::size_t elbow_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed);

/// Splits `total` across strata proportionally to `sizes`: floor of each exact
/// quota, then the leftover units go to the largest fractional remainders
/// (lower index on ties). Never exceeds a stratum's size. Sums to
/// min(total, sum(sizes)).
std::vector<std::size_t> allocate_quotas(const std::vector<std::size_t>& sizes, std::size_t total);

}  // namespace userprof
