#include <algorithm>
#include <vector>

#include "userprof/embedding.hpp"
#include "userprof/error.hpp"
#include "userprof/kernels.hpp"

namespace userprof::kernels {

void cosine_distances(std::span<const double> unit_query, const Matrix& unit_rows, std::span<double> out) {
  for (std::size_t j = 0; j < unit_rows.rows(); ++j) out[j] = 1.0 - dot(unit_query, unit_rows.row(j));
}

double mean_of_smallest(std::span<double> distances, std::size_t k) {
  auto kth = distances.begin() + static_cast<std::ptrdiff_t>(k);
  std::nth_element(distances.begin(), kth - 1, distances.end());
  std::sort(distances.begin(), kth);
  double sum = 0.0;
  for (auto it = distances.begin(); it != kth; ++it) sum += *it;
  return sum / static_cast<double>(k);
}

void mean_knn_distance_serial(const Matrix& unit_queries, const Matrix& unit_rows, std::size_t k,
                              std::span<double> out) {
  if (k == 0 || k > unit_rows.rows()) throw InvalidArgument("k must be in [1, index size]");
  std::vector<double> buf(unit_rows.rows());
  for (std::size_t i = 0; i < unit_queries.rows(); ++i) {
    cosine_distances(unit_queries.row(i), unit_rows, buf);
    out[i] = mean_of_smallest(buf, k);
  }
}

}  // namespace userprof::kernels
