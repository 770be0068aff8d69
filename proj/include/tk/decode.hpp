#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tk/metrics.hpp"
#include "tk/model.hpp"
#include "tk/tokens.hpp"

namespace tk::decode {

using model::MultiTaskModel;
using model::Task;

// Forced dialect ids: correct with probability `correctness`, otherwise one of
// the other K-1 dialects uniformly.
struct StressProtocol {
  double correctness = 1.0;
  std::uint64_t seed = 0;
};

struct DecodeOptions {
  int max_symbols_per_frame = 10;
  std::optional<int> dii_dialect;
  std::optional<StressProtocol> forced;
  // Ground-truth feed: every emitted dialect token enters the history as this one.
  std::optional<int> feed_dialect;
  int true_dialect = -1;       // scored against by `forced`
  std::string utterance_id;    // keys the protocol's random stream
};

struct Hypothesis {
  std::vector<int> tokens;  // model argmax, blank excluded
  std::vector<int> frames;  // frame index per token
  std::vector<int> clean;   // tokens with dialect ids removed
  std::map<int, int> votes;
  std::optional<int> dialect;
  int frames_consumed = 0;
  int substitutions = 0;
  int correct_substitutions = 0;
};

// Encoder output plus the classifier logits when the model has one.
struct Encoded {
  Mat<double> h;
  std::optional<Mat<double>> adc_logits;
};

Encoded encode_utterance(const MultiTaskModel& model, const Mat<double>& features);

// First maximum of a 1 x K row.
int argmax_dialect(const Mat<double>& logits);

Hypothesis greedy_decode(const MultiTaskModel& model, const Encoded& enc, Task task, const DecodeOptions& options);
// Encodes first; the DII dialect defaults to the classifier's argmax.
Hypothesis greedy_decode(const MultiTaskModel& model, const Mat<double>& features, Task task,
                         const DecodeOptions& options);

enum class DialectSource { kAdc, kVotes };

std::optional<int> vote_dialect(const Hypothesis& hyp);
std::optional<int> predict_dialect(const MultiTaskModel& model, const Mat<double>& features, DialectSource source,
                                   const DecodeOptions& options = {});

struct EvalItem {
  std::string id;
  Mat<double> features;
  int dialect = 0;
  std::string ref_h;
  std::string ref_p;
  double audio_seconds = 0;
};

// Where the DII input dialect comes from at inference.
enum class DiiSource { kAdc, kTruth, kFixed };

struct EvalOptions {
  int max_symbols_per_frame = 10;
  DiiSource dii_source = DiiSource::kAdc;
  int fixed_dialect = 0;
  bool feed_truth = false;
  std::optional<StressProtocol> forced;
};

struct TaskResult {
  bool present = false;
  double rate = 0;  // CER or SER in percent
  std::optional<double> vote_acc;
  // Percent of utterances whose hypothesis carries at least one dialect token.
  std::optional<double> vote_coverage;
  std::vector<std::string> hyps;
  std::vector<std::vector<int>> tokens;
};

struct EvalResult {
  TaskResult h, p;
  std::optional<double> adc_acc;
  long substitutions = 0;
  long correct_substitutions = 0;
  double audio_seconds = 0;
  double wall_seconds = 0;

  double empirical_correctness() const;
  // Classifier accuracy when available, otherwise H votes, then P votes.
  std::optional<double> dialect_acc() const;
  std::optional<double> vote_acc() const;
};

// Tables may be null for tasks the model does not have.
EvalResult evaluate(const MultiTaskModel& model, const data::TokenTable* table_h, const data::TokenTable* table_p,
                    const std::vector<EvalItem>& items, const EvalOptions& options);

struct StressRow {
  double p = 0;
  double empirical_correctness = 0;
  std::optional<double> cer_h;
  std::optional<double> ser_p;
  std::optional<double> dialect_acc;  // from the model's own dialect tokens
  EvalResult result;
};

std::vector<StressRow> stress_test(const MultiTaskModel& model, const data::TokenTable* table_h,
                                   const data::TokenTable* table_p, const std::vector<EvalItem>& items,
                                   const std::vector<double>& p_grid, std::uint64_t seed, EvalOptions base = {});

void write_stress_csv(std::ostream& os, const std::vector<StressRow>& rows);

}  // namespace tk::decode
