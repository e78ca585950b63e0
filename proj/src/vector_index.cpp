#include "userprof/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "userprof/embedding.hpp"
#include "userprof/error.hpp"
#include "userprof/kernels.hpp"

namespace userprof {

double tie_key(double score) { return std::round(score / kTieResolution); }

VectorIndex VectorIndex::build(std::vector<std::pair<std::string, Vector>> items) {
  std::vector<std::string> ids;
  Matrix m;
  ids.reserve(items.size());
  for (auto& [id, v] : items) {
    if (!m.empty() && v.size() != m.cols()) throw InvalidArgument("dimension mismatch for id " + id);
    if (v.empty()) throw InvalidArgument("empty vector for id " + id);
    ids.push_back(std::move(id));
    m.append_row(v);
  }
  return build(ids, m);
}

VectorIndex VectorIndex::build(const std::vector<std::string>& ids, const Matrix& vectors) {
  if (ids.size() != vectors.rows()) throw InvalidArgument("id count does not match vector count");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  VectorIndex idx;
  idx.ids_.reserve(ids.size());
  idx.rows_ = Matrix(ids.size(), vectors.cols());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& id = ids[order[pos]];
    if (pos > 0 && idx.ids_.back() == id) throw InvalidArgument("duplicate id in index: " + id);
    idx.ids_.push_back(id);
    auto src = vectors.row(order[pos]);
    auto dst = idx.rows_.row(pos);
    std::copy(src.begin(), src.end(), dst.begin());
    normalize_in_place(dst);
  }
  return idx;
}

std::vector<Neighbor> VectorIndex::top_k(std::span<const double> query, std::size_t k) const {
  if (empty() || k == 0) return {};
  if (query.size() != dim()) {
    throw InvalidArgument("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
                          std::to_string(dim()));
  }
  Vector q(query.begin(), query.end());
  normalize_in_place(q);
  std::vector<double> dist(size());
  kernels::cosine_distances(q, rows_, dist);
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, size());
  std::vector<double> key(size());
  for (std::size_t i = 0; i < size(); ++i) key[i] = tie_key(dist[i]);
  // Rows are in id order, so position breaks ties.
  auto less = [&](std::size_t a, std::size_t b) { return key[a] != key[b] ? key[a] < key[b] : a < b; };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids_[order[i]], dist[order[i]]});
  return out;
}

}  // namespace userprof
