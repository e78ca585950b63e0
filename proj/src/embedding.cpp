#include "userprof/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "userprof/error.hpp"
#include "userprof/kernels.hpp"
#include "userprof/text.hpp"

namespace userprof {

void EmbedderConfig::validate() const {
  if (dim < 8) throw InvalidArgument("embedder dim must be >= 8");
  if (provider == EmbedderProvider::remote && (!endpoint || endpoint->empty())) {
    throw InvalidArgument("remote embedder requires an endpoint");
  }
  if (batch_size == 0) throw InvalidArgument("embedder batch_size must be positive");
}

Vector Embedder::embed(std::string_view text) const {
  Matrix m = embed_batch({std::string(text)});
  auto row = m.row(0);
  return Vector(row.begin(), row.end());
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim < 8) throw InvalidArgument("embedder dim must be >= 8");
}

std::uint64_t HashingEmbedder::token_hash(std::string_view token) {
  // FNV-1a followed by a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

void HashingEmbedder::embed_into(std::string_view text, std::span<double> out) const {
  auto tokens = text::word_tokens(text);
  if (tokens.empty()) {
    // Punctuation-only text still gets a stable direction.
    auto norm = text::normalize(text);
    if (norm.empty()) throw InvalidArgument("cannot embed empty text");
    tokens.push_back(std::move(norm));
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& tok : tokens) {
    std::uint64_t h = token_hash(tok);
    out[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  }
  double n = l2_norm(out);
  if (n == 0.0) {
    // Signed collisions cancelled every bucket; fall back to the whole-text hash.
    std::uint64_t h = token_hash(text::normalize(text));
    out[h % dim_] = 1.0;
    return;
  }
  for (double& v : out) v /= n;
}

Vector HashingEmbedder::embed(std::string_view text) const {
  Vector v(dim_);
  embed_into(text, v);
  return v;
}

Matrix HashingEmbedder::embed_batch_serial(const std::vector<std::string>& texts) const {
  Matrix m(texts.size(), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) embed_into(texts[i], m.row(i));
  return m;
}

Matrix HashingEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  Matrix m(texts.size(), dim_);
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  std::string first_error;
#pragma omp parallel for schedule(dynamic, 256)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      embed_into(texts[i], m.row(static_cast<std::size_t>(i)));
    } catch (const std::exception& e) {
#pragma omp critical(hashing_embed_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw InvalidArgument(first_error);
  return m;
}

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  cfg.validate();
  if (cfg.provider == EmbedderProvider::remote) return std::make_unique<RemoteEmbedder>(cfg);
  return std::make_unique<HashingEmbedder>(cfg.dim);
}

Vector embed_text(std::string_view text, const EmbedderConfig& cfg) {
  if (text::trim(text).empty()) throw InvalidArgument("cannot embed empty text");
  return make_embedder(cfg)->embed(text);
}

double dot(std::span<const double> a, std::span<const double> b) {
  // Four independent accumulators; the summation order is fixed.
  const std::size_t n = a.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void normalize_in_place(std::span<double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument("vector has a non-finite entry");
  }
  double n = l2_norm(v);
  if (n == 0.0) throw InvalidArgument("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine of a zero vector is undefined");
  double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) { return 1.0 - cosine_similarity(a, b); }

Vector mean_row(const Matrix& m) {
  Vector mean(m.cols(), 0.0);
  if (m.rows() == 0) return mean;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) mean[j] += r[j];
  }
  for (double& x : mean) x /= static_cast<double>(m.rows());
  return mean;
}

}  // namespace userprof
