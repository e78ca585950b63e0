#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "userprof/llm_gateway.hpp"
#include "userprof/profiling.hpp"

namespace userprof {

enum class StanceLabel { True = 0, False = 1, CannotAnswer = 2 };

inline constexpr std::size_t kStanceClasses = 3;

/// "True", "False", "CannotAnswer".
const char* to_string(StanceLabel l);
/// Accepts the three canonical names and "Cannot be answered" (any case).
StanceLabel stance_label_from_string(std::string_view s);

struct ParsedLabel {
  StanceLabel label = StanceLabel::CannotAnswer;
  bool warning = false;  // no label token found
};

/// Case-insensitive whole-word search for True, then False, then the
/// cannot-answer phrasings. Falls back to CannotAnswer with a warning.
ParsedLabel parse_label(std::string_view text);

struct StanceDecision {
  StanceLabel label = StanceLabel::CannotAnswer;
  bool parse_warning = false;
  bool transport_failure = false;
  std::string response;
};

/// Renders the judge prompt with {statement_id}, {statement} and {context}.
StanceDecision detect_stance(std::string_view context, const StanceStatement& statement, const PromptTemplate& tpl,
                             Gateway& gateway);

struct EvalResult {
  std::string user_id;
  std::string statement_id;
  std::string method;
  StanceLabel predicted = StanceLabel::CannotAnswer;
  StanceLabel gold = StanceLabel::CannotAnswer;
};

void write_results_jsonl(const std::filesystem::path& path, const std::vector<EvalResult>& results);
std::vector<EvalResult> read_results_jsonl(const std::filesystem::path& path);

using PairKey = std::pair<std::string, std::string>;  // (user, statement)

/// Reads {user_id, statement_id, label} lines; duplicate pairs are rejected.
std::map<PairKey, StanceLabel> read_gold_jsonl(const std::filesystem::path& path);
void write_gold_jsonl(const std::filesystem::path& path, const std::map<PairKey, StanceLabel>& gold);

/// Mean F1 over the classes that occur in gold or predictions. Throws on empty input.
double macro_f1(std::span<const EvalResult> results);
double macro_f1(std::span<const StanceLabel> predicted, std::span<const StanceLabel> gold);

struct ConfidenceInterval {
  double lower = 0.0;
  double point = 0.0;
  double upper = 0.0;
};

/// Percentile bootstrap of macro_f1 over pairs. `point` is the full-sample
/// value; bounds are clamped so that lower <= point <= upper.
ConfidenceInterval bootstrap_ci(std::span<const EvalResult> results, std::size_t resamples = 10000,
                                double level = 0.95, std::uint64_t seed = 123);

struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  double p_value = 1.0;
  bool exact = true;
  bool significant = false;  // p < 0.05
};

/// Exact two-sided binomial test when b + c < 25, otherwise chi-square with
/// continuity correction.
McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

/// Unweighted three-class kappa; 1 when chance agreement is 1.
double cohens_kappa(std::span<const StanceLabel> ann1, std::span<const StanceLabel> ann2);

struct MethodScore {
  std::string method;
  std::size_t pairs = 0;
  ConfidenceInterval f1;
};

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  McNemarResult result;
};

struct ComparisonReport {
  std::vector<MethodScore> methods;
  std::vector<PairwiseTest> pairwise;

  std::string to_json() const;
  /// Aligned table: one row per method pair with p-value and Y/N.
  std::string to_text() const;
};

/// Every method must cover the same (user, statement) pairs.
ComparisonReport compare_methods(const std::vector<std::pair<std::string, std::vector<EvalResult>>>& all_results,
                                 std::uint64_t seed = 123, std::size_t resamples = 10000);

}  // namespace userprof
