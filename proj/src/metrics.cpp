#include "tk/metrics.hpp"

#include <cmath>
#include <numeric>

#include "tk/data.hpp"

namespace tk::metrics {

Unit parse_unit(const std::string& name) {
  if (name == "char") return Unit::kChar;
  if (name == "syllable") return Unit::kSyllable;
  throw ConfigError("unknown unit '" + name + "' (expected char|syllable)");
}

std::vector<std::string> tokenize(const std::string& text, Unit unit) {
  if (unit == Unit::kChar) {
    std::vector<std::string> out;
    for (auto& cp : data::split_code_points(text)) {
      if (cp != " " && cp != "\t" && cp != "\n") out.push_back(std::move(cp));
    }
    return out;
  }
  return data::split_whitespace(text);
}

double corpus_rate(const std::vector<std::pair<std::string, std::string>>& pairs, Unit unit) {
  long errors = 0, total = 0;
  for (const auto& [ref, hyp] : pairs) {
    const auto r = tokenize(ref, unit);
    const auto h = tokenize(hyp, unit);
    const EditOps ops = edit_ops(r, h);
    errors += ops.errors();
    total += ops.ref_units;
  }
  if (total == 0) throw MetricError("corpus_rate: reference corpus has no units");
  return 100.0 * static_cast<double>(errors) / static_cast<double>(total);
}

double dialect_accuracy(const std::vector<std::optional<int>>& predictions, const std::vector<int>& truths) {
  if (predictions.size() != truths.size()) {
    throw MetricError("dialect_accuracy: " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(truths.size()) + " references");
  }
  if (truths.empty()) throw MetricError("dialect_accuracy: no utterances");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i] && *predictions[i] == truths[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(truths.size());
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

double relative_improvement(double base, double sys) {
  if (base == 0) throw MetricError("relative_improvement: baseline rate is zero");
  return 100.0 * (base - sys) / base;
}

double rtfx(double audio_seconds, double wall_seconds) {
  if (!(wall_seconds > 0)) throw MetricError("rtfx: wall time must be positive");
  return audio_seconds / wall_seconds;
}

std::vector<double> EfficiencyReport::per_run_rtfx() const {
  std::vector<double> out;
  for (double w : wall_seconds) out.push_back(rtfx(audio_seconds, w));
  return out;
}

double EfficiencyReport::mean_rtfx() const {
  const auto r = per_run_rtfx();
  if (r.empty()) throw MetricError("EfficiencyReport: no timed runs");
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

double count_params(const ParameterStore<double>& params) {
  return static_cast<double>(params.element_count()) / 1e6;
}

}  // namespace tk::metrics
