#include "tk/dialect.hpp"

#include <cmath>

namespace tk::dialect {

int VocabularyDescriptor::dialect_token(int d) const {
  if (d < 0 || d >= dialects) {
    throw IndexError("dialect index " + std::to_string(d) + " outside [0," + std::to_string(dialects) + ")");
  }
  return base + d;
}

VocabularyDescriptor extend_vocab(int base, int dialects) {
  if (base < 2) throw ConfigError("extend_vocab: base vocabulary needs blank plus one symbol, got " + std::to_string(base));
  if (dialects < 0) throw ConfigError("extend_vocab: negative dialect count");
  return {base, dialects};
}

Strategy parse_strategy(const std::string& name) {
  if (name == "none") return Strategy::kNone;
  if (name == "psc") return Strategy::kPsc;
  if (name == "prsc") return Strategy::kPrsc;
  if (name == "tic") return Strategy::kTic;
  throw ConfigError("unknown conditioning strategy '" + name + "' (expected none|psc|prsc|tic)");
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNone: return "none";
    case Strategy::kPsc: return "psc";
    case Strategy::kPrsc: return "prsc";
    case Strategy::kTic: return "tic";
  }
  return "none";
}

ConditionedTarget condition_targets(std::span<const int> y, int dialect, Strategy strategy,
                                    const VocabularyDescriptor& vocab) {
  for (int tok : y) {
    if (vocab.is_dialect_token(tok)) {
      throw ContractError("condition_targets: target already contains dialect token " + std::to_string(tok));
    }
    if (tok < 0 || tok >= vocab.base) {
      throw IndexError("condition_targets: token " + std::to_string(tok) + " outside base vocabulary");
    }
  }
  ConditionedTarget out{strategy, {}};
  if (strategy == Strategy::kNone) {
    out.tokens.assign(y.begin(), y.end());
    return out;
  }
  const int d = vocab.dialect_token(dialect);
  switch (strategy) {
    case Strategy::kPsc:
      out.tokens.assign(y.begin(), y.end());
      out.tokens.push_back(d);
      break;
    case Strategy::kPrsc:
      out.tokens.push_back(d);
      out.tokens.insert(out.tokens.end(), y.begin(), y.end());
      break;
    case Strategy::kTic:
      for (int tok : y) {
        out.tokens.push_back(tok);
        out.tokens.push_back(d);
      }
      break;
    case Strategy::kNone:
      break;
  }
  return out;
}

StrippedTokens strip_dialect_tokens(std::span<const int> tokens, const VocabularyDescriptor& vocab) {
  StrippedTokens out;
  for (int tok : tokens) {
    if (tok >= vocab.base) {
      ++out.votes[vocab.dialect_of(tok)];
    } else {
      out.clean.push_back(tok);
    }
  }
  return out;
}

std::optional<int> majority_vote(const std::map<int, int>& votes) {
  std::optional<int> best;
  int best_count = 0;
  bool tie = false;
  for (const auto& [d, n] : votes) {
    if (n > best_count) {
      best = d;
      best_count = n;
      tie = false;
    } else if (n == best_count && n > 0) {
      tie = true;
    }
  }
  if (tie || best_count == 0) return std::nullopt;
  return best;
}

double combine_losses(double asr_loss, double aux_loss, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("combine_losses: lambda must be non-negative");
  return asr_loss + lambda * aux_loss;
}

Var<double> combine_losses(Var<double> asr_loss, Var<double> aux_loss, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("combine_losses: lambda must be non-negative");
  return add(asr_loss, scale(aux_loss, lambda));
}

AdcOutput adc_forward(Var<double> h_enc, const AdcVars& p) {
  if (h_enc.rows() == 0) throw DataError("adc_forward: empty encoder output");
  Var<double> keys = matmul(h_enc, p.key);                          // T x D
  Var<double> scores = transpose(matmul(keys, transpose(p.query)));  // 1 x T
  Var<double> weights = softmax(scores, 1);
  Var<double> pooled = weighted_sum(weights, keys);
  Var<double> logits = matmul(pooled, p.out);
  return {weights, pooled, logits};
}

Var<double> adc_loss(Var<double> logits, int d) {
  if (logits.rows() != 1) throw DimensionError("adc_loss: logits must be a single row, got " + logits.shape_str());
  if (d < 0 || d >= logits.cols()) {
    throw IndexError("adc_loss: dialect " + std::to_string(d) + " outside [0," + std::to_string(logits.cols()) + ")");
  }
  return scale(pick(log_softmax(logits, 1), 0, d), -1.0);
}

Var<double> dii_augment(Var<double> h_enc, int d, Var<double> table) {
  const int id[1] = {d};
  Var<double> e = embedding_lookup(table, std::span<const int>(id, 1));
  return concat<double>({e, h_enc}, 0);
}

}  // namespace tk::dialect
