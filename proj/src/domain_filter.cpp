#include "userprof/domain_filter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "userprof/error.hpp"
#include "userprof/kernels.hpp"
#include "userprof/random.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

void FilterConfig::validate() const {
  if (!(theta > 0.5 && theta < 1.0)) throw InvalidArgument("theta must lie in (0.5, 1)");
  if (k == 0) throw InvalidArgument("k must be positive");
}

const char* to_string(DomainLabel l) {
  switch (l) {
    case DomainLabel::domain: return "domain";
    case DomainLabel::non_domain: return "non_domain";
    case DomainLabel::borderline: return "borderline";
  }
  return "borderline";
}

DomainLabel domain_label_from_string(std::string_view s) {
  if (s == "domain") return DomainLabel::domain;
  if (s == "non_domain") return DomainLabel::non_domain;
  if (s == "borderline") return DomainLabel::borderline;
  throw InvalidArgument("unknown domain label: " + std::string(s));
}

DomainLabel distance_band(double mean_distance, const FilterConfig& cfg) {
  if (mean_distance < 1.0 - cfg.theta) return DomainLabel::domain;
  if (mean_distance > cfg.theta) return DomainLabel::non_domain;
  return DomainLabel::borderline;
}

DistanceLabel label_by_distance(std::string tweet_id, std::span<const double> tweet_vec, const VectorIndex& chunks,
                                const FilterConfig& cfg) {
  cfg.validate();
  if (chunks.size() < cfg.k) {
    throw InvalidArgument("chunk index holds " + std::to_string(chunks.size()) + " chunks, fewer than k=" +
                          std::to_string(cfg.k));
  }
  if (tweet_vec.size() != chunks.dim()) throw InvalidArgument("tweet vector dimension does not match the index");
  Vector q(tweet_vec.begin(), tweet_vec.end());
  normalize_in_place(q);
  std::vector<double> dist(chunks.size());
  kernels::cosine_distances(q, chunks.unit_rows(), dist);
  double mean = kernels::mean_of_smallest(dist, cfg.k);
  return {std::move(tweet_id), mean, distance_band(mean, cfg)};
}

std::vector<DistanceLabel> label_all(const EmbeddedSet& tweets, const VectorIndex& chunks, const FilterConfig& cfg,
                                     Execution exec) {
  cfg.validate();
  if (chunks.size() < cfg.k) {
    throw InvalidArgument("chunk index holds " + std::to_string(chunks.size()) + " chunks, fewer than k=" +
                          std::to_string(cfg.k));
  }
  if (tweets.ids.size() != tweets.vectors.rows()) throw InvalidArgument("ids and vectors are misaligned");
  if (tweets.vectors.rows() == 0) return {};
  if (tweets.vectors.cols() != chunks.dim()) throw InvalidArgument("tweet vector dimension does not match the index");
  Matrix unit = tweets.vectors;
  for (std::size_t i = 0; i < unit.rows(); ++i) normalize_in_place(unit.row(i));
  std::vector<double> means(unit.rows());
  if (exec == Execution::serial) {
    kernels::mean_knn_distance_serial(unit, chunks.unit_rows(), cfg.k, means);
  } else {
    kernels::mean_knn_distance_omp(unit, chunks.unit_rows(), cfg.k, means);
  }
  std::vector<DistanceLabel> out;
  out.reserve(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) out.push_back({tweets.ids[i], means[i], distance_band(means[i], cfg)});
  return out;
}

double DistanceReport::domain_percent() const {
  std::size_t labeled = domain + non_domain;
  return labeled ? 100.0 * static_cast<double>(domain) / static_cast<double>(labeled) : 0.0;
}

std::string DistanceReport::to_text() const {
  std::ostringstream ss;
  ss << "domain " << domain << "  non_domain " << non_domain << "  borderline " << borderline << "  ratio "
     << std::fixed << std::setprecision(1) << domain_percent() << '/' << (domain + non_domain ? 100.0 - domain_percent() : 0.0)
     << '\n';
  std::size_t peak = *std::max_element(histogram.begin(), histogram.end());
  for (std::size_t b = 0; b < kBins; ++b) {
    if (histogram[b] == 0) continue;
    ss << std::setprecision(2) << '[' << b * kBinWidth << ", " << (b + 1) * kBinWidth << ") " << std::setw(8)
       << histogram[b] << ' ' << std::string(peak ? histogram[b] * 50 / peak : 0, '#') << '\n';
  }
  return ss.str();
}

DistanceReport distance_report(const std::vector<DistanceLabel>& labels) {
  DistanceReport r;
  for (const auto& l : labels) {
    auto bin = static_cast<std::size_t>(std::floor(l.mean_distance / DistanceReport::kBinWidth));
    ++r.histogram[std::min(bin, DistanceReport::kBins - 1)];
    switch (l.label) {
      case DomainLabel::domain: ++r.domain; break;
      case DomainLabel::non_domain: ++r.non_domain; break;
      case DomainLabel::borderline: ++r.borderline; break;
    }
  }
  return r;
}

TrainingSet build_training_set(const EmbeddedSet& tweets, const VectorIndex& chunks, const FilterConfig& cfg) {
  auto all = label_all(tweets, chunks, cfg);
  TrainingSet ts;
  ts.report = distance_report(all);
  for (auto& l : all) {
    if (l.label != DomainLabel::borderline) ts.labeled.push_back(std::move(l));
  }
  if (ts.labeled.empty()) throw InvalidArgument("every tweet is borderline; the filter configuration is too strict");
  return ts;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double accuracy_on(const LinearClassifier& m, const Matrix& x, const std::vector<int>& y,
                   const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t r : rows) {
    int pred = classify(m, x.row(r)).label == DomainLabel::domain ? 1 : 0;
    ok += pred == y[r];
  }
  return static_cast<double>(ok) / static_cast<double>(rows.size());
}

}  // namespace

TrainedClassifier train_classifier(const Matrix& vectors, const std::vector<int>& labels, const TrainingHyper& hyper) {
  if (vectors.rows() != labels.size()) throw InvalidArgument("labels and vectors are misaligned");
  if (labels.size() < 20) throw InvalidArgument("train_classifier needs at least 20 examples");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidArgument("labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) throw InvalidArgument("train_classifier needs both classes");
  if (!(hyper.threshold > 0.0 && hyper.threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hyper.seed);
  rng.shuffle(order);
  std::size_t n_val = labels.size() / 5;
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  const std::size_t d = vectors.cols();
  LinearClassifier m{Vector(d, 0.0), 0.0, hyper.threshold};
  Vector grad(d);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t r : train) {
      auto x = vectors.row(r);
      double err = sigmoid(dot(m.weights, x) + m.bias) - labels[r];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) m.weights[j] -= hyper.learning_rate * (grad[j] * inv_n + hyper.l2 * m.weights[j]);
    m.bias -= hyper.learning_rate * grad_b * inv_n;
  }
  TrainedClassifier out;
  out.model = std::move(m);
  out.train_accuracy = accuracy_on(out.model, vectors, labels, train);
  out.validation_accuracy = accuracy_on(out.model, vectors, labels, val);
  out.validation_rows = std::move(val);
  return out;
}

Classification classify(const LinearClassifier& model, std::span<const double> vec) {
  if (vec.size() != model.weights.size()) throw InvalidArgument("vector dimension does not match the classifier");
  double score = sigmoid(dot(model.weights, vec) + model.bias);
  return {score >= model.threshold ? DomainLabel::domain : DomainLabel::non_domain, score};
}

ConfusionMetrics confusion_metrics(const std::vector<int>& pred, const std::vector<int>& gold, std::size_t num_classes) {
  if (pred.size() != gold.size()) throw InvalidArgument("prediction and gold lengths differ");
  if (pred.empty()) throw InvalidArgument("confusion_metrics needs at least one example");
  ConfusionMetrics cm;
  cm.matrix.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || gold[i] < 0 || static_cast<std::size_t>(pred[i]) >= num_classes ||
        static_cast<std::size_t>(gold[i]) >= num_classes) {
      throw InvalidArgument("label out of range");
    }
    ++cm.matrix[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
  }
  std::size_t correct = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t tp = cm.matrix[c][c], pred_c = 0, gold_c = 0;
    for (std::size_t o = 0; o < num_classes; ++o) {
      pred_c += cm.matrix[o][c];
      gold_c += cm.matrix[c][o];
    }
    ClassMetrics m;
    m.support = gold_c;
    m.precision = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    m.recall = gold_c ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    f1_sum += m.f1;
    correct += tp;
    cm.per_class.push_back(m);
  }
  cm.macro_f1 = f1_sum / static_cast<double>(num_classes);
  cm.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  return cm;
}

std::string ConfusionMetrics::to_json() const {
  json j;
  j["matrix"] = matrix;
  j["macro_f1"] = macro_f1;
  j["accuracy"] = accuracy;
  for (const auto& c : per_class) {
    j["per_class"].push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  }
  return j.dump(2);
}

std::string ConfusionMetrics::to_text(const std::vector<std::string>& names) const {
  std::ostringstream ss;
  auto name = [&](std::size_t c) { return c < names.size() ? names[c] : std::to_string(c); };
  ss << std::left << std::setw(14) << "gold\\pred";
  for (std::size_t c = 0; c < matrix.size(); ++c) ss << std::right << std::setw(12) << name(c);
  ss << '\n';
  for (std::size_t g = 0; g < matrix.size(); ++g) {
    ss << std::left << std::setw(14) << name(g);
    for (std::size_t p = 0; p < matrix.size(); ++p) ss << std::right << std::setw(12) << matrix[g][p];
    ss << '\n';
  }
  ss << '\n' << std::left << std::setw(14) << "class" << std::right << std::setw(11) << "precision" << std::setw(10)
     << "recall" << std::setw(10) << "f1" << std::setw(10) << "support" << '\n';
  ss << std::fixed << std::setprecision(4);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    ss << std::left << std::setw(14) << name(c) << std::right << std::setw(11) << per_class[c].precision << std::setw(10)
       << per_class[c].recall << std::setw(10) << per_class[c].f1 << std::setw(10) << per_class[c].support << '\n';
  }
  ss << "macro_f1 " << macro_f1 << "  accuracy " << accuracy << '\n';
  return ss.str();
}

std::vector<DistanceLabel> extract_borderline(const std::vector<DistanceLabel>& labels, const FilterConfig& cfg,
                                              std::size_t n) {
  cfg.validate();
  std::vector<DistanceLabel> out;
  for (const auto& l : labels) {
    if (l.mean_distance > 1.0 - cfg.theta && l.mean_distance < cfg.theta) out.push_back(l);
  }
  std::sort(out.begin(), out.end(), [](const DistanceLabel& a, const DistanceLabel& b) {
    double da = std::abs(a.mean_distance - 0.5), db = std::abs(b.mean_distance - 0.5);
    return da != db ? da < db : a.tweet_id < b.tweet_id;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

std::vector<DistanceLabel> extract_borderline(const EmbeddedSet& tweets, const VectorIndex& chunks,
                                              const FilterConfig& cfg, std::size_t n) {
  return extract_borderline(label_all(tweets, chunks, cfg), cfg, n);
}

void write_labels_jsonl(const std::filesystem::path& path, const std::vector<DistanceLabel>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& l : labels) {
    out << json{{"tweet_id", l.tweet_id}, {"mean_distance", l.mean_distance}, {"label", to_string(l.label)}}.dump()
        << '\n';
  }
}

std::vector<DistanceLabel> read_labels_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("label file not found: " + path.string());
  std::vector<DistanceLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      json obj = json::parse(line);
      out.push_back({obj.at("tweet_id").get<std::string>(), obj.at("mean_distance").get<double>(),
                     domain_label_from_string(obj.at("label").get<std::string>())});
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid label record: ") + e.what(), lineno);
    }
  }
  return out;
}

std::string classifier_to_json(const LinearClassifier& model) {
  return json{{"weights", model.weights}, {"bias", model.bias}, {"threshold", model.threshold}}.dump();
}

LinearClassifier classifier_from_json(const std::string& text) {
  json j = json::parse(text);
  return {j.at("weights").get<Vector>(), j.at("bias").get<double>(), j.at("threshold").get<double>()};
}

}  // namespace userprof
