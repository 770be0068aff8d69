#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tk/errors.hpp"
#include "tk/params.hpp"

namespace tk::metrics {

struct EditOps {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_units = 0;

  long errors() const { return substitutions + deletions + insertions; }
};

// Levenshtein alignment of hyp against ref. When several minimal alignments
// exist the backtrace prefers substitution, then deletion, then insertion.
template <typename T>
EditOps edit_ops(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<long> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> long& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = static_cast<long>(i);
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = static_cast<long>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const long diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditOps ops;
  ops.ref_units = static_cast<long>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const long cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (at(i, j) == at(i - 1, j - 1) + cost) {
        ops.substitutions += cost;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++ops.deletions;
      --i;
    } else {
      ++ops.insertions;
      --j;
    }
  }
  return ops;
}

template <typename T>
EditOps edit_ops(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return edit_ops(std::span<const T>(ref), std::span<const T>(hyp));
}

enum class Unit { kChar, kSyllable };

Unit parse_unit(const std::string& name);
std::vector<std::string> tokenize(const std::string& text, Unit unit);

// 100 * sum(S + D + I) / sum(N_ref) over (reference, hypothesis) pairs.
double corpus_rate(const std::vector<std::pair<std::string, std::string>>& pairs, Unit unit);

// 100 * correct / total; missing predictions count as incorrect.
double dialect_accuracy(const std::vector<std::optional<int>>& predictions, const std::vector<int>& truths);

double round2(double x);

// Relative improvement in percent, 100 * (base - sys) / base.
double relative_improvement(double base, double sys);

struct EfficiencyReport {
  double params_millions = 0;
  double audio_seconds = 0;
  std::vector<double> wall_seconds;  // one per timed run

  std::vector<double> per_run_rtfx() const;
  double mean_rtfx() const;
};

double rtfx(double audio_seconds, double wall_seconds);
double count_params(const ParameterStore<double>& params);

}  // namespace tk::metrics
