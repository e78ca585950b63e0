#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "userprof/embedding.hpp"
#include "userprof/vector_index.hpp"

namespace userprof {

struct ScoredDoc {
  std::string id;
  double score;
};

/// Okapi BM25 over word tokens (Unicode segmentation, case-folded, no stemming).
class Bm25Index {
 public:
  struct Posting {
    std::size_t doc;
    std::size_t tf;
  };

  static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs, double k1 = 1.2,
                         double b = 0.75);

  std::size_t size() const noexcept { return ids_.size(); }
  double avg_doc_length() const noexcept { return avg_len_; }
  double k1() const noexcept { return k1_; }
  double b() const noexcept { return b_; }

  /// ln((N - df + 0.5) / (df + 0.5) + 1)
  double idf(const std::string& term) const;

  /// Scores documents sharing at least one distinct query term; descending
  /// score, ties by id; at most `top` results. Throws on a query with no tokens.
  std::vector<ScoredDoc> rank(std::string_view query, std::size_t top) const;

 private:
  std::vector<std::string> ids_;  // sorted
  std::vector<std::size_t> lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  double avg_len_ = 0.0;
  double k1_ = 1.2;
  double b_ = 0.75;
};

inline std::vector<ScoredDoc> bm25_rank(const Bm25Index& index, std::string_view query, std::size_t top) {
  return index.rank(query, top);
}

/// Nearest tweets to an embedded statement.
std::vector<Neighbor> dense_rank(const VectorIndex& index, std::span<const double> statement_vec, std::size_t top);

struct AspectSpec {
  std::string statement_id;
  std::vector<std::string> keywords;
};

/// Reads {statement_id: [keywords]}.
std::vector<AspectSpec> read_aspects(const std::filesystem::path& path);

struct SemaeSelection {
  std::vector<std::string> ids;
  std::vector<std::string> warnings;
};

/// Keeps tweets containing at least one normalized keyword, then returns the n
/// of them nearest to their own mean embedding.
SemaeSelection semae_select(const EmbeddedSet& tweets, const std::vector<std::string>& texts, const AspectSpec& aspect,
                            std::size_t n);

}  // namespace userprof
