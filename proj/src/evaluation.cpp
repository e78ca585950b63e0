#include "userprof/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "userprof/digest.hpp"
#include "userprof/error.hpp"
#include "userprof/random.hpp"
#include "userprof/text.hpp"

namespace userprof {

using json = nlohmann::json;

const char* to_string(StanceLabel l) {
  switch (l) {
    case StanceLabel::True: return "True";
    case StanceLabel::False: return "False";
    case StanceLabel::CannotAnswer: return "CannotAnswer";
  }
  return "CannotAnswer";
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_word(const std::string& hay, std::string_view word) {
  std::size_t pos = 0;
  while ((pos = hay.find(word, pos)) != std::string::npos) {
    bool left = pos == 0 || !word_char(hay[pos - 1]);
    std::size_t end = pos + word.size();
    bool right = end == hay.size() || !word_char(hay[end]);
    if (left && right) return true;
    ++pos;
  }
  return false;
}

std::size_t idx(StanceLabel l) { return static_cast<std::size_t>(l); }

}  // namespace

StanceLabel stance_label_from_string(std::string_view s) {
  std::string l = ascii_lower(text::trim(s));
  if (l == "true") return StanceLabel::True;
  if (l == "false") return StanceLabel::False;
  if (l == "cannotanswer" || l == "cannot be answered" || l == "cannot_answer") return StanceLabel::CannotAnswer;
  throw InvalidArgument("invalid stance label '" + std::string(s) + "'");
}

ParsedLabel parse_label(std::string_view text) {
  std::string l = ascii_lower(text);
  if (contains_word(l, "true")) return {StanceLabel::True, false};
  if (contains_word(l, "false")) return {StanceLabel::False, false};
  for (std::string_view phrase : {"cannot be answered", "cannot answer", "cannotanswer", "can't be answered"}) {
    if (contains_word(l, phrase)) return {StanceLabel::CannotAnswer, false};
  }
  return {StanceLabel::CannotAnswer, true};
}

StanceDecision detect_stance(std::string_view context, const StanceStatement& statement, const PromptTemplate& tpl,
                             Gateway& gateway) {
  if (text::trim(context).empty()) throw InvalidArgument("evaluation context is empty");
  std::string prompt = tpl.render(
      {{"statement_id", statement.id}, {"statement", statement.text}, {"context", std::string(context)}});
  StanceDecision d;
  try {
    d.response = gateway.complete(CompletionRequest(prompt)).text;
  } catch (const std::exception& e) {
    d.transport_failure = true;
    d.response = e.what();
    return d;
  }
  auto parsed = parse_label(d.response);
  d.label = parsed.label;
  d.parse_warning = parsed.warning;
  return d;
}

void write_results_jsonl(const std::filesystem::path& path, const std::vector<EvalResult>& results) {
  std::string out;
  for (const auto& r : results) {
    out += json{{"user_id", r.user_id},
                {"statement_id", r.statement_id},
                {"method", r.method},
                {"predicted", to_string(r.predicted)},
                {"gold", to_string(r.gold)}}
               .dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<EvalResult> read_results_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  std::vector<EvalResult> out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      EvalResult r{j.at("user_id").get<std::string>(), j.at("statement_id").get<std::string>(),
                   j.at("method").get<std::string>(),
                   stance_label_from_string(j.at("predicted").get<std::string>()),
                   stance_label_from_string(j.at("gold").get<std::string>())};
      if (!seen.emplace(r.user_id, r.statement_id, r.method).second) {
        throw ParseError("duplicate result for " + r.user_id + "/" + r.statement_id + "/" + r.method, n);
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
  }
  return out;
}

std::map<PairKey, StanceLabel> read_gold_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path.string());
  std::map<PairKey, StanceLabel> gold;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    PairKey key;
    StanceLabel label;
    try {
      json j = json::parse(line);
      key = {j.at("user_id").get<std::string>(), j.at("statement_id").get<std::string>()};
      label = stance_label_from_string(j.at("label").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string() + ": " + e.what(), n);
    }
    if (!gold.emplace(key, label).second) {
      throw ParseError(path.string() + ": duplicate gold pair " + key.first + "/" + key.second, n);
    }
  }
  return gold;
}

void write_gold_jsonl(const std::filesystem::path& path, const std::map<PairKey, StanceLabel>& gold) {
  std::string out;
  for (const auto& [key, label] : gold) {
    out += json{{"user_id", key.first}, {"statement_id", key.second}, {"label", to_string(label)}}.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

double macro_f1(std::span<const StanceLabel> predicted, std::span<const StanceLabel> gold) {
  if (predicted.size() != gold.size()) throw InvalidArgument("prediction and gold lengths differ");
  if (gold.empty()) throw InvalidArgument("macro-F1 of an empty result set");
  std::array<std::size_t, kStanceClasses> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] == gold[i]) {
      ++tp[idx(gold[i])];
    } else {
      ++fp[idx(predicted[i])];
      ++fn[idx(gold[i])];
    }
  }
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < kStanceClasses; ++c) {
    std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    ++classes;
  }
  return sum / static_cast<double>(classes);
}

double macro_f1(std::span<const EvalResult> results) {
  std::vector<StanceLabel> pred, gold;
  pred.reserve(results.size());
  gold.reserve(results.size());
  for (const auto& r : results) {
    pred.push_back(r.predicted);
    gold.push_back(r.gold);
  }
  return macro_f1(pred, gold);
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

}  // namespace

ConfidenceInterval bootstrap_ci(std::span<const EvalResult> results, std::size_t resamples, double level,
                                std::uint64_t seed) {
  if (results.empty()) throw InvalidArgument("bootstrap of an empty result set");
  if (resamples == 0) throw InvalidArgument("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must be in (0, 1)");
  const std::size_t n = results.size();
  std::vector<StanceLabel> pred(n), gold(n);
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = results[i].predicted;
    gold[i] = results[i].gold;
  }
  ConfidenceInterval ci;
  ci.point = macro_f1(pred, gold);

  Rng rng(seed);
  std::vector<double> stats(resamples);
  std::vector<StanceLabel> rp(n), rg(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = rng.uniform_index(n);
      rp[i] = pred[j];
      rg[i] = gold[j];
    }
    stats[r] = macro_f1(rp, rg);
  }
  std::sort(stats.begin(), stats.end());
  double alpha = (1.0 - level) / 2.0;
  ci.lower = std::min(quantile_sorted(stats, alpha), ci.point);
  ci.upper = std::max(quantile_sorted(stats, 1.0 - alpha), ci.point);
  return ci;
}

McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) throw InvalidArgument("McNemar inputs differ in length");
  McNemarResult r;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++r.b;
    if (!correct_a[i] && correct_b[i]) ++r.c;
  }
  const std::size_t n = r.b + r.c;
  if (n == 0) {
    r.p_value = 1.0;
  } else if (n < 25) {
    r.exact = true;
    const std::size_t k = std::min(r.b, r.c);
    double tail = 0.0;
    double coef = 1.0;  // C(n, i)
    for (std::size_t i = 0; i <= k; ++i) {
      tail += coef;
      coef = coef * static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    r.p_value = std::min(1.0, 2.0 * tail * std::pow(0.5, static_cast<double>(n)));
  } else {
    r.exact = false;
    double diff = std::max(0.0, std::fabs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0);
    double chi2 = diff * diff / static_cast<double>(n);
    r.p_value = std::min(1.0, std::erfc(std::sqrt(chi2 / 2.0)));
  }
  r.significant = r.p_value < 0.05;
  return r;
}

double cohens_kappa(std::span<const StanceLabel> ann1, std::span<const StanceLabel> ann2) {
  if (ann1.size() != ann2.size()) throw InvalidArgument("annotation lists differ in length");
  if (ann1.empty()) throw InvalidArgument("kappa of empty annotation lists");
  const double n = static_cast<double>(ann1.size());
  std::array<double, kStanceClasses> m1{}, m2{};
  double agree = 0.0;
  for (std::size_t i = 0; i < ann1.size(); ++i) {
    m1[idx(ann1[i])] += 1.0;
    m2[idx(ann2[i])] += 1.0;
    if (ann1[i] == ann2[i]) agree += 1.0;
  }
  double po = agree / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < kStanceClasses; ++c) pe += (m1[c] / n) * (m2[c] / n);
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

ComparisonReport compare_methods(const std::vector<std::pair<std::string, std::vector<EvalResult>>>& all_results,
                                 std::uint64_t seed, std::size_t resamples) {
  if (all_results.empty()) throw InvalidArgument("no methods to compare");
  std::vector<std::map<PairKey, const EvalResult*>> keyed(all_results.size());
  for (std::size_t m = 0; m < all_results.size(); ++m) {
    const auto& [name, results] = all_results[m];
    if (results.empty()) throw InvalidArgument("method " + name + " has no results");
    for (const auto& r : results) {
      if (!keyed[m].emplace(PairKey{r.user_id, r.statement_id}, &r).second) {
        throw InvalidArgument("method " + name + " has duplicate pair " + r.user_id + "/" + r.statement_id);
      }
    }
    if (m > 0) {
      bool same = keyed[m].size() == keyed[0].size() &&
                  std::equal(keyed[m].begin(), keyed[m].end(), keyed[0].begin(),
                             [](const auto& x, const auto& y) { return x.first == y.first; });
      if (!same) throw InvalidArgument("method " + name + " covers different pairs than " + all_results[0].first);
    }
  }

  ComparisonReport report;
  for (const auto& [name, results] : all_results) {
    report.methods.push_back({name, results.size(), bootstrap_ci(results, resamples, 0.95, seed)});
  }
  for (std::size_t a = 0; a < all_results.size(); ++a) {
    for (std::size_t b = a + 1; b < all_results.size(); ++b) {
      std::vector<bool> ca, cb;
      for (const auto& [key, ra] : keyed[a]) {
        const EvalResult* rb = keyed[b].at(key);
        ca.push_back(ra->predicted == ra->gold);
        cb.push_back(rb->predicted == rb->gold);
      }
      report.pairwise.push_back({all_results[a].first, all_results[b].first, mcnemar(ca, cb)});
    }
  }
  return report;
}

std::string ComparisonReport::to_json() const {
  json ms = json::array();
  for (const auto& m : methods) {
    ms.push_back({{"method", m.method},
                  {"pairs", m.pairs},
                  {"macro_f1", m.f1.point},
                  {"ci_lower", m.f1.lower},
                  {"ci_upper", m.f1.upper}});
  }
  json ps = json::array();
  for (const auto& p : pairwise) {
    ps.push_back({{"method_a", p.method_a},
                  {"method_b", p.method_b},
                  {"b", p.result.b},
                  {"c", p.result.c},
                  {"test", p.result.exact ? "exact" : "chi2"},
                  {"p_value", p.result.p_value},
                  {"significant", p.result.significant ? "Y" : "N"}});
  }
  return json{{"methods", ms}, {"pairwise", ps}}.dump(1);
}

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  std::size_t w = 6;
  for (const auto& m : methods) w = std::max(w, m.method.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %6s  %8s  %17s\n", static_cast<int>(w), "Method", "Pairs", "Macro-F1",
                "95% CI");
  out << buf;
  for (const auto& m : methods) {
    std::snprintf(buf, sizeof buf, "%-*s  %6zu  %8.4f  [%.4f, %.4f]\n", static_cast<int>(w), m.method.c_str(), m.pairs,
                  m.f1.point, m.f1.lower, m.f1.upper);
    out << buf;
  }
  if (!pairwise.empty()) {
    std::size_t cw = 10;
    for (const auto& p : pairwise) cw = std::max(cw, p.method_a.size() + p.method_b.size() + 4);
    out << '\n';
    std::snprintf(buf, sizeof buf, "%-*s  %10s  %12s\n", static_cast<int>(cw), "Comparison", "p-value", "Significance");
    out << buf;
    for (const auto& p : pairwise) {
      std::string label = p.method_a + " vs " + p.method_b;
      std::snprintf(buf, sizeof buf, "%-*s  %10.3g  %12s\n", static_cast<int>(cw), label.c_str(), p.result.p_value,
                    p.result.significant ? "Y" : "N");
      out << buf;
    }
  }
  return out.str();
}

}  // namespace userprof
