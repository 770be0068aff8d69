#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tk/dialect.hpp"
#include "tk/params.hpp"
#include "tk/transducer.hpp"

namespace tk::model {

using Real = double;
using G = Graph<Real>;
using V = Var<Real>;

struct EncoderConfig {
  Index input_dim = 16;  // F
  Index model_dim = 32;  // D
  Index num_blocks = 2;
  Index subsample_factor = 4;
  Index ff_dim = 64;
};

// Strided front-end: output frame t sees kSubsampleKernel * factor input
// frames centred on its own block, zero-padded at the edges.
inline constexpr Index kSubsampleKernel = 3;
Mat<Real> subsample_windows(const Mat<Real>& features, Index factor);

struct PredictorConfig {
  int context_size = 2;
  Index embed_dim = 16;
  // Output width always equals the encoder's model_dim.
};

enum class Task { kH, kP };

std::string task_name(Task t);

enum class LossKind { kFull, kPruned };

struct DialectMode {
  bool adc = false;
  bool dii = false;
  dialect::Strategy conditioning = dialect::Strategy::kNone;
};

struct ModelConfig {
  EncoderConfig encoder;
  PredictorConfig predictor;
  Index joint_dim = 32;
  bool task_h = true;
  bool task_p = true;
  int num_dialects = 3;
  DialectMode mode;
  LossKind loss = LossKind::kFull;
  Index s_range = 5;
  double simple_loss_scale = 0.5;
  double lambda = 0.5;
  double weight_h = 1.0;
  double weight_p = 1.0;

  bool extended_vocab() const {
    return mode.conditioning != dialect::Strategy::kNone || (mode.dii && mode.adc);
  }
  void validate() const;
};

// One training/evaluation item with targets over the base vocabularies.
struct Example {
  std::string id;
  Mat<Real> features;  // T0 x F
  std::optional<std::vector<int>> target_h;
  std::optional<std::vector<int>> target_p;
  int dialect = 0;
  double audio_seconds = 0;
};

// Shared encoder, per-task stateless predictor and joint network, and the
// optional dialect components, all owned by one parameter store.
class MultiTaskModel {
 public:
  MultiTaskModel(ModelConfig cfg, int base_vocab_h, int base_vocab_p, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore<Real>& params() { return params_; }
  const ParameterStore<Real>& params() const { return params_; }

  bool has_task(Task t) const { return t == Task::kH ? cfg_.task_h : cfg_.task_p; }
  const dialect::VocabularyDescriptor& vocab(Task t) const { return t == Task::kH ? vocab_h_ : vocab_p_; }

  // The non-const overloads bind trainable parameters; the const ones bind
  // read-only values (no gradient).
  V encode(G& g, const Mat<Real>& features);
  V encode(G& g, const Mat<Real>& features) const;

  // h_pred for the next position given the full emitted history; only the
  // last context_size tokens are read.
  V predict(G& g, Task t, std::span<const int> history);
  V predict(G& g, Task t, std::span<const int> history) const;

  // h_pred for every prefix of `targets`: (U+1) x D.
  V predict_targets(G& g, Task t, std::span<const int> targets);
  V predict_targets(G& g, Task t, std::span<const int> targets) const;

  transducer::JointVars<Real> joint_vars(G& g, Task t);
  transducer::JointVars<Real> joint_vars(G& g, Task t) const;

  dialect::AdcVars adc_vars(G& g);
  dialect::AdcVars adc_vars(G& g) const;

  V dii_table(G& g);
  V dii_table(G& g) const;

  V simple_am_w(G& g, Task t);
  V simple_lm_w(G& g, Task t);

  // Ids of the last c tokens of `history`, left-padded with blank.
  std::vector<int> context_ids(Task t, std::span<const int> history) const;

  std::string prefix(Task t) const { return t == Task::kH ? "h" : "p"; }

 private:
  template <typename Self>
  friend struct ModelAccess;

  ModelConfig cfg_;
  dialect::VocabularyDescriptor vocab_h_;
  dialect::VocabularyDescriptor vocab_p_;
  ParameterStore<Real> params_;
};

struct ForwardResult {
  V loss;              // L_Final averaged over the batch
  double l_asr = 0;    // batch mean of L_H + L_P
  double l_h = 0;
  double l_p = 0;
  double l_a = 0;
  double l_final = 0;
  bool finite = true;
};

// Conditioned target sequence for one task of an example.
std::vector<int> task_targets(const MultiTaskModel& model, Task t, const Example& ex);

// Per-utterance L_H + L_P (+ lambda * L_A), averaged over the batch.
ForwardResult multitask_forward(G& g, MultiTaskModel& model, std::span<const Example* const> batch);

}  // namespace tk::model
