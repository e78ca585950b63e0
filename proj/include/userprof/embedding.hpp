#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "userprof/matrix.hpp"

namespace userprof {

enum class EmbedderProvider { hashing, remote };

struct EmbedderConfig {
  EmbedderProvider provider = EmbedderProvider::hashing;
  std::size_t dim = 256;
  std::optional<std::string> endpoint;
  std::optional<std::string> model_name;
  double timeout_seconds = 30.0;
  int retries = 2;
  std::size_t batch_size = 64;

  /// Throws InvalidArgument: dim < 8, or remote without endpoint.
  void validate() const;
};

/// Produces unit-L2 vectors of a fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector embed(std::string_view text) const;
  /// One row per input text, same order.
  virtual Matrix embed_batch(const std::vector<std::string>& texts) const = 0;
};

/// Signed feature hashing of normalized word tokens into `dim` buckets.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim);

  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;
  Matrix embed_batch(const std::vector<std::string>& texts) const override;

  /// Serial reference for embed_batch.
  Matrix embed_batch_serial(const std::vector<std::string>& texts) const;

  static std::uint64_t token_hash(std::string_view token);
  std::size_t bucket(std::string_view token) const { return token_hash(token) % dim_; }
  static double sign(std::string_view token) { return (token_hash(token) >> 63) ? -1.0 : 1.0; }

 private:
  void embed_into(std::string_view text, std::span<double> out) const;
  std::size_t dim_;
};

/// Embeddings from an HTTP endpoint: POST {model, texts[]} -> {vectors[][]}.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig cfg);
  std::size_t dim() const override { return cfg_.dim; }
  Matrix embed_batch(const std::vector<std::string>& texts) const override;

 private:
  EmbedderConfig cfg_;
};

std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg);

/// Embeds one text with a freshly constructed provider. Throws on empty text.
Vector embed_text(std::string_view text, const EmbedderConfig& cfg);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// Scales to unit L2 norm. Throws InvalidArgument for zero or non-finite input.
void normalize_in_place(std::span<double> v);

/// 1 - cos(a, b). Throws InvalidArgument on dimension mismatch or a zero vector.
double cosine_distance(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Ids with aligned embedding rows.
struct EmbeddedSet {
  std::vector<std::string> ids;
  Matrix vectors;
};

/// Element-wise mean of the rows (not normalized).
Vector mean_row(const Matrix& m);

}  // namespace userprof
