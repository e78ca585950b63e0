#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an
// OpenMP variant; both produce bit-identical output.

#include <cstddef>
#include <span>

#include "userprof/matrix.hpp"

namespace userprof::kernels {

/// out[j] = 1 - <query, rows[j]>; both sides unit-normalized.
void cosine_distances(std::span<const double> unit_query, const Matrix& unit_rows, std::span<double> out);

/// For every query row, the mean of its k smallest cosine distances to `unit_rows`.
/// Requires k <= unit_rows.rows() and out.size() == unit_queries.rows().
void mean_knn_distance_serial(const Matrix& unit_queries, const Matrix& unit_rows, std::size_t k,
                              std::span<double> out);
void mean_knn_distance_omp(const Matrix& unit_queries, const Matrix& unit_rows, std::size_t k,
                           std::span<double> out);

/// Mean of the k smallest values of `distances`, summed in ascending order.
/// `distances` is reordered.
double mean_of_smallest(std::span<double> distances, std::size_t k);

}  // namespace userprof::kernels
