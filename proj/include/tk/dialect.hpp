#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tk/ops.hpp"

namespace tk::dialect {

struct DialectId {
  int index = 0;
  std::string name;
};

// Token table of one decoder after reserving the last K ids for dialects.
struct VocabularyDescriptor {
  int base = 0;  // V_base, blank (id 0) included
  int dialects = 0;

  int extended() const { return base + dialects; }
  int dialect_token(int d) const;
  bool is_dialect_token(int token) const { return token >= base && token < extended(); }
  int dialect_of(int token) const { return token - base; }
};

VocabularyDescriptor extend_vocab(int base, int dialects);

enum class Strategy { kNone, kPsc, kPrsc, kTic };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct ConditionedTarget {
  Strategy strategy = Strategy::kNone;
  std::vector<int> tokens;
};

ConditionedTarget condition_targets(std::span<const int> y, int dialect, Strategy strategy,
                                    const VocabularyDescriptor& vocab);

struct StrippedTokens {
  std::vector<int> clean;
  std::map<int, int> votes;  // dialect index -> count
};

StrippedTokens strip_dialect_tokens(std::span<const int> tokens, const VocabularyDescriptor& vocab);

// Majority vote; ties and an empty multiset give no prediction.
std::optional<int> majority_vote(const std::map<int, int>& votes);

// L_Final = L_ASR + lambda * L_A.
double combine_losses(double asr_loss, double aux_loss, double lambda);
Var<double> combine_losses(Var<double> asr_loss, Var<double> aux_loss, double lambda);

// Auxiliary dialect classifier weights bound on a graph.
struct AdcVars {
  Var<double> query;  // 1 x D
  Var<double> key;    // D x D
  Var<double> out;    // D x K
};

struct AdcOutput {
  Var<double> weights;  // 1 x T attention over frames
  Var<double> pooled;   // g, 1 x D
  Var<double> logits;   // z_d, 1 x K
};

// Attention pooling of key-projected frames followed by a linear classifier.
AdcOutput adc_forward(Var<double> h_enc, const AdcVars& p);

// Cross-entropy of softmax(logits) against dialect d, natural log.
Var<double> adc_loss(Var<double> logits, int d);

// Prefixes the dialect embedding as an extra first frame: (T+1) x D.
Var<double> dii_augment(Var<double> h_enc, int d, Var<double> table);

}  // namespace tk::dialect
