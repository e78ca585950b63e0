#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "userprof/embedding.hpp"
#include "userprof/vector_index.hpp"

namespace userprof {

struct FilterConfig {
  double theta = 0.7;
  std::size_t k = 10;

  /// theta must lie in (0.5, 1) so that [0, 1-theta) and (theta, 2] are disjoint.
  void validate() const;
};

enum class DomainLabel { non_domain = 0, domain = 1, borderline = 2 };

const char* to_string(DomainLabel l);
DomainLabel domain_label_from_string(std::string_view s);

/// domain when mean < 1 - theta, non_domain when mean > theta, borderline otherwise
/// (both boundary points are borderline).
DomainLabel distance_band(double mean_distance, const FilterConfig& cfg);

struct DistanceLabel {
  std::string tweet_id;
  double mean_distance = 0.0;
  DomainLabel label = DomainLabel::borderline;
};

/// Mean cosine distance from one tweet to its k nearest chunks, banded.
DistanceLabel label_by_distance(std::string tweet_id, std::span<const double> tweet_vec, const VectorIndex& chunks,
                                const FilterConfig& cfg);

enum class Execution { serial, parallel };

/// Labels every row of `tweets` against the chunk index.
std::vector<DistanceLabel> label_all(const EmbeddedSet& tweets, const VectorIndex& chunks, const FilterConfig& cfg,
                                     Execution exec = Execution::parallel);

/// Histogram over [0, 2] with 0.05-wide bins plus class counts.
struct DistanceReport {
  static constexpr double kBinWidth = 0.05;
  static constexpr std::size_t kBins = 40;
  std::array<std::size_t, kBins> histogram{};
  std::size_t domain = 0;
  std::size_t non_domain = 0;
  std::size_t borderline = 0;

  /// Share of domain among non-borderline labels, in percent.
  double domain_percent() const;
  std::string to_text() const;
};

DistanceReport distance_report(const std::vector<DistanceLabel>& labels);

struct TrainingSet {
  std::vector<DistanceLabel> labeled;  // non-borderline only, in input order
  DistanceReport report;
};

/// Throws InvalidArgument when every tweet is borderline.
TrainingSet build_training_set(const EmbeddedSet& tweets, const VectorIndex& chunks, const FilterConfig& cfg);

struct LinearClassifier {
  Vector weights;
  double bias = 0.0;
  double threshold = 0.5;
};

struct TrainingHyper {
  double learning_rate = 0.5;
  std::size_t epochs = 200;
  double l2 = 1e-4;
  std::uint64_t seed = 123;
  double threshold = 0.5;
};

struct TrainedClassifier {
  LinearClassifier model;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  std::vector<std::size_t> validation_rows;  // rows of the training matrix held out
};

/// Full-batch logistic regression on an 80/20 seeded split. `labels` are 0/1
/// aligned with the rows of `vectors`.
TrainedClassifier train_classifier(const Matrix& vectors, const std::vector<int>& labels, const TrainingHyper& hyper);

struct Classification {
  DomainLabel label;
  double score;
};

/// Sigmoid score; domain iff score >= threshold.
Classification classify(const LinearClassifier& model, std::span<const double> vec);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// matrix[gold][pred].
struct ConfusionMetrics {
  std::vector<std::vector<std::size_t>> matrix;
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  double accuracy = 0.0;

  std::string to_json() const;
  std::string to_text(const std::vector<std::string>& class_names) const;
};

/// Labels are class indices in [0, num_classes). Macro-F1 averages every class.
ConfusionMetrics confusion_metrics(const std::vector<int>& pred, const std::vector<int>& gold,
                                   std::size_t num_classes = 2);

/// Tweets strictly inside (1-theta, theta), closest to 0.5 first (ties by id), at most n.
std::vector<DistanceLabel> extract_borderline(const std::vector<DistanceLabel>& labels, const FilterConfig& cfg,
                                              std::size_t n);

/// Labels `tweets` then extracts the borderline band.
std::vector<DistanceLabel> extract_borderline(const EmbeddedSet& tweets, const VectorIndex& chunks,
                                              const FilterConfig& cfg, std::size_t n);

void write_labels_jsonl(const std::filesystem::path& path, const std::vector<DistanceLabel>& labels);
std::vector<DistanceLabel> read_labels_jsonl(const std::filesystem::path& path);

std::string classifier_to_json(const LinearClassifier& model);
LinearClassifier classifier_from_json(const std::string& text);

}  // namespace userprof
