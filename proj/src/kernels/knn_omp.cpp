#include <vector>

#include <omp.h>

#include "userprof/error.hpp"
#include "userprof/kernels.hpp"

namespace userprof::kernels {

void mean_knn_distance_omp(const Matrix& unit_queries, const Matrix& unit_rows, std::size_t k,
                           std::span<double> out) {
  if (k == 0 || k > unit_rows.rows()) throw InvalidArgument("k must be in [1, index size]");
  const auto n = static_cast<std::ptrdiff_t>(unit_queries.rows());
#pragma omp parallel
  {
    std::vector<double> buf(unit_rows.rows());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      cosine_distances(unit_queries.row(static_cast<std::size_t>(i)), unit_rows, buf);
      out[static_cast<std::size_t>(i)] = mean_of_smallest(buf, k);
    }
  }
}

}  // namespace userprof::kernels
