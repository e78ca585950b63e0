#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "userprof/matrix.hpp"

namespace userprof {

struct Neighbor {
  std::string id;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Scores closer than this rank as ties.
inline constexpr double kTieResolution = 1e-12;

/// Ordering key for a distance or similarity: equal keys are tied.
double tie_key(double score);

/// Exact cosine-distance index. Immutable after build; queries may run concurrently.
class VectorIndex {
 public:
  VectorIndex() = default;

  /// Rows are stored unit-normalized and ordered by id so positional order
  /// doubles as the id tie-break. Throws on duplicate ids, mismatched
  /// dimensions, or zero vectors.
  static VectorIndex build(std::vector<std::pair<std::string, Vector>> items);
  static VectorIndex build(const std::vector<std::string>& ids, const Matrix& vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return rows_.cols(); }
  bool empty() const noexcept { return ids_.empty(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& unit_rows() const noexcept { return rows_; }

  /// Ascending distance, ties (within kTieResolution) by ascending id,
  /// length min(k, size()). Reported distances are unrounded.
  std::vector<Neighbor> top_k(std::span<const double> query, std::size_t k) const;

 private:
  std::vector<std::string> ids_;
  Matrix rows_;
};

}  // namespace userprof
