#include "tk/decode.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace tk::decode {

namespace {

using RowD = Eigen::Matrix<double, 1, Eigen::Dynamic>;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::mt19937_64 protocol_stream(std::uint64_t seed, const std::string& id, Task task) {
  const std::uint64_t key = fnv1a(id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(task == Task::kH ? 0 : 1)};
  return std::mt19937_64(seq);
}

// Joint network of one task evaluated directly on parameter values, with the
// predictor output cached per context window.
class StepScorer {
 public:
  StepScorer(const MultiTaskModel& m, Task t, const Mat<double>& h) : model_(m), task_(t) {
    const auto& P = m.params();
    const std::string n = m.prefix(t) + ".";
    embed_ = &P.at(n + "pred.embed").values();
    pred_w_ = &P.at(n + "pred.w").values();
    pred_b_ = &P.at(n + "pred.b").values();
    joint_pred_w_ = &P.at(n + "joint.pred_w").values();
    out_w_ = &P.at(n + "joint.out_w").values();
    out_b_ = &P.at(n + "joint.out_b").values();
    const Mat<double>& enc_w = P.at(n + "joint.enc_w").values();
    if (h.cols() != enc_w.rows()) {
      throw ContractError("greedy_decode: encoder width " + std::to_string(h.cols()) + " does not match joint input " +
                          std::to_string(enc_w.rows()));
    }
    enc_proj_ = h * enc_w;
    enc_proj_.rowwise() += P.at(n + "joint.enc_b").values().row(0);
  }

  Index frames() const { return enc_proj_.rows(); }

  int argmax(Index t, const std::vector<int>& history) {
    const RowD& pp = pred_proj(model_.context_ids(task_, history));
    RowD hidden = (enc_proj_.row(t) + pp).array().tanh();
    RowD logits = hidden * (*out_w_) + out_b_->row(0);
    Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
  }

 private:
  const RowD& pred_proj(const std::vector<int>& ctx) {
    auto it = cache_.find(ctx);
    if (it != cache_.end()) return it->second;
    const Index E = embed_->cols();
    RowD e(static_cast<Index>(ctx.size()) * E);
    for (std::size_t j = 0; j < ctx.size(); ++j) e.segment(static_cast<Index>(j) * E, E) = embed_->row(ctx[j]);
    RowD pred = ((e * (*pred_w_)) + pred_b_->row(0)).cwiseMax(0.0);
    return cache_.emplace(ctx, pred * (*joint_pred_w_)).first->second;
  }

  const MultiTaskModel& model_;
  Task task_;
  const Mat<double>* embed_;
  const Mat<double>* pred_w_;
  const Mat<double>* pred_b_;
  const Mat<double>* joint_pred_w_;
  const Mat<double>* out_w_;
  const Mat<double>* out_b_;
  Mat<double> enc_proj_;
  std::map<std::vector<int>, RowD> cache_;
};

}  // namespace

Encoded encode_utterance(const MultiTaskModel& model, const Mat<double>& features) {
  model::G g;
  model::V h = model.encode(g, features);
  Encoded out;
  out.h = h.value();
  if (model.config().mode.adc) out.adc_logits = dialect::adc_forward(h, model.adc_vars(g)).logits.value();
  return out;
}

int argmax_dialect(const Mat<double>& logits) {
  if (logits.size() == 0) throw ContractError("argmax_dialect: empty logits");
  Index r = 0, c = 0;
  logits.maxCoeff(&r, &c);
  return static_cast<int>(c);
}

Hypothesis greedy_decode(const MultiTaskModel& model, const Encoded& enc, Task task, const DecodeOptions& options) {
  if (!model.has_task(task)) throw ContractError("greedy_decode: model has no " + model::task_name(task) + " decoder");
  if (options.max_symbols_per_frame < 1) throw ContractError("greedy_decode: max_symbols_per_frame must be >= 1");
  if (options.forced && options.feed_dialect) {
    throw ContractError("greedy_decode: forced protocol and ground-truth feed are exclusive");
  }
  const auto& cfg = model.config();
  const auto& vocab = model.vocab(task);
  if (options.forced) {
    const double p = options.forced->correctness;
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("stress protocol correctness must lie in [0,1]");
    if (options.true_dialect < 0 || options.true_dialect >= vocab.dialects) {
      throw ContractError("forced protocol needs the utterance's true dialect");
    }
  }

  Mat<double> h = enc.h;
  if (cfg.mode.dii) {
    if (!options.dii_dialect) throw ContractError("greedy_decode: DII model needs an input dialect");
    const int d = *options.dii_dialect;
    const Mat<double>& table = model.params().at("dii.embed").values();
    if (d < 0 || d >= table.rows()) throw IndexError("DII dialect " + std::to_string(d) + " out of range");
    Mat<double> aug(h.rows() + 1, h.cols());
    aug.row(0) = table.row(d);
    aug.bottomRows(h.rows()) = h;
    h = std::move(aug);
  }

  StepScorer scorer(model, task, h);
  std::optional<std::mt19937_64> rng;
  if (options.forced) rng = protocol_stream(options.forced->seed, options.utterance_id, task);

  Hypothesis hyp;
  std::vector<int> history;
  for (Index t = 0; t < scorer.frames(); ++t) {
    for (int s = 0; s < options.max_symbols_per_frame; ++s) {
      const int k = scorer.argmax(t, history);
      if (k == transducer::kBlank) break;
      hyp.tokens.push_back(k);
      hyp.frames.push_back(static_cast<int>(t));
      int fed = k;
      if (vocab.is_dialect_token(k)) {
        if (options.feed_dialect) {
          fed = vocab.dialect_token(*options.feed_dialect);
        } else if (options.forced) {
          std::uniform_real_distribution<double> coin(0.0, 1.0);
          int d = options.true_dialect;
          if (!(coin(*rng) < options.forced->correctness) && vocab.dialects > 1) {
            std::uniform_int_distribution<int> other(0, vocab.dialects - 2);
            const int o = other(*rng);
            d = o >= options.true_dialect ? o + 1 : o;
          }
          ++hyp.substitutions;
          if (d == options.true_dialect) ++hyp.correct_substitutions;
          fed = vocab.dialect_token(d);
        }
      }
      history.push_back(fed);
    }
  }
  hyp.frames_consumed = static_cast<int>(scorer.frames());
  auto stripped = dialect::strip_dialect_tokens(hyp.tokens, vocab);
  hyp.clean = std::move(stripped.clean);
  hyp.votes = std::move(stripped.votes);
  hyp.dialect = dialect::majority_vote(hyp.votes);
  return hyp;
}

Hypothesis greedy_decode(const MultiTaskModel& model, const Mat<double>& features, Task task,
                         const DecodeOptions& options) {
  Encoded enc = encode_utterance(model, features);
  DecodeOptions opts = options;
  if (model.config().mode.dii && !opts.dii_dialect && enc.adc_logits) opts.dii_dialect = argmax_dialect(*enc.adc_logits);
  return greedy_decode(model, enc, task, opts);
}

std::optional<int> vote_dialect(const Hypothesis& hyp) { return dialect::majority_vote(hyp.votes); }

std::optional<int> predict_dialect(const MultiTaskModel& model, const Mat<double>& features, DialectSource source,
                                   const DecodeOptions& options) {
  if (source == DialectSource::kAdc) {
    if (!model.config().mode.adc) throw ContractError("predict_dialect: model has no dialect classifier");
    return argmax_dialect(*encode_utterance(model, features).adc_logits);
  }
  const Task task = model.has_task(Task::kH) ? Task::kH : Task::kP;
  return vote_dialect(greedy_decode(model, features, task, options));
}

double EvalResult::empirical_correctness() const {
  return substitutions == 0 ? 0.0 : static_cast<double>(correct_substitutions) / static_cast<double>(substitutions);
}

std::optional<double> EvalResult::vote_acc() const {
  if (h.present && h.vote_acc) return h.vote_acc;
  if (p.present && p.vote_acc) return p.vote_acc;
  return std::nullopt;
}

std::optional<double> EvalResult::dialect_acc() const {
  if (adc_acc) return adc_acc;
  return vote_acc();
}

EvalResult evaluate(const MultiTaskModel& model, const data::TokenTable* table_h, const data::TokenTable* table_p,
                    const std::vector<EvalItem>& items, const EvalOptions& options) {
  const auto& cfg = model.config();
  if (cfg.mode.dii && !cfg.mode.adc && options.dii_source == DiiSource::kAdc) {
    throw ConfigError("DII without a dialect classifier needs ground-truth or fixed dialect input at evaluation");
  }
  if ((options.feed_truth || options.forced) && !cfg.extended_vocab()) {
    throw ConfigError("model has no dialect tokens to feed");
  }
  EvalResult res;
  const Task tasks[2] = {Task::kH, Task::kP};
  std::vector<std::pair<std::string, std::string>> pairs[2];
  std::vector<std::optional<int>> votes[2];
  std::vector<std::optional<int>> adc_preds;
  std::vector<int> truths;

  const auto t0 = std::chrono::steady_clock::now();
  for (const EvalItem& item : items) {
    Encoded enc = encode_utterance(model, item.features);
    DecodeOptions opts;
    opts.max_symbols_per_frame = options.max_symbols_per_frame;
    opts.utterance_id = item.id;
    opts.true_dialect = item.dialect;
    opts.forced = options.forced;
    if (options.feed_truth) opts.feed_dialect = item.dialect;
    if (cfg.mode.dii) {
      switch (options.dii_source) {
        case DiiSource::kAdc: opts.dii_dialect = argmax_dialect(*enc.adc_logits); break;
        case DiiSource::kTruth: opts.dii_dialect = item.dialect; break;
        case DiiSource::kFixed: opts.dii_dialect = options.fixed_dialect; break;
      }
    }
    if (enc.adc_logits) adc_preds.push_back(argmax_dialect(*enc.adc_logits));
    truths.push_back(item.dialect);
    for (int i = 0; i < 2; ++i) {
      if (!model.has_task(tasks[i])) continue;
      const data::TokenTable* table = i == 0 ? table_h : table_p;
      if (!table) throw ContractError("evaluate: missing token table for task " + model::task_name(tasks[i]));
      Hypothesis hyp = greedy_decode(model, enc, tasks[i], opts);
      TaskResult& tr = i == 0 ? res.h : res.p;
      tr.hyps.push_back(table->decode(hyp.clean));
      tr.tokens.push_back(hyp.tokens);
      pairs[i].emplace_back(i == 0 ? item.ref_h : item.ref_p, tr.hyps.back());
      votes[i].push_back(hyp.dialect);
      res.substitutions += hyp.substitutions;
      res.correct_substitutions += hyp.correct_substitutions;
    }
    res.audio_seconds += item.audio_seconds;
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (int i = 0; i < 2; ++i) {
    if (!model.has_task(tasks[i])) continue;
    TaskResult& tr = i == 0 ? res.h : res.p;
    tr.present = true;
    tr.rate = metrics::corpus_rate(pairs[i], i == 0 ? table_h->unit() : table_p->unit());
    if (cfg.extended_vocab()) {
      tr.vote_acc = metrics::dialect_accuracy(votes[i], truths);
      const auto voted = std::count_if(tr.tokens.begin(), tr.tokens.end(), [&](const std::vector<int>& t) {
        return std::any_of(t.begin(), t.end(), [&](int tok) { return tok >= model.vocab(tasks[i]).base; });
      });
      tr.vote_coverage = 100.0 * static_cast<double>(voted) / static_cast<double>(tr.tokens.size());
    }
  }
  if (cfg.mode.adc) res.adc_acc = metrics::dialect_accuracy(adc_preds, truths);
  return res;
}

std::vector<StressRow> stress_test(const MultiTaskModel& model, const data::TokenTable* table_h,
                                   const data::TokenTable* table_p, const std::vector<EvalItem>& items,
                                   const std::vector<double>& p_grid, std::uint64_t seed, EvalOptions base) {
  if (!model.config().extended_vocab()) throw ConfigError("stress-test needs a model with dialect tokens");
  std::vector<StressRow> rows;
  for (double p : p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("stress-test p values must lie in [0,1], got " + std::to_string(p));
    EvalOptions opts = base;
    opts.feed_truth = false;
    opts.forced = StressProtocol{p, seed};
    StressRow row;
    row.p = p;
    row.result = evaluate(model, table_h, table_p, items, opts);
    row.empirical_correctness = row.result.empirical_correctness();
    if (row.result.h.present) row.cer_h = row.result.h.rate;
    if (row.result.p.present) row.ser_p = row.result.p.rate;
    row.dialect_acc = row.result.vote_acc();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_stress_csv(std::ostream& os, const std::vector<StressRow>& rows) {
  auto cell = [&os](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << "p,empirical_correctness,cer_hanzi,ser_pinyin,dialect_acc\n";
  os << std::setprecision(10);
  for (const StressRow& r : rows) {
    os << r.p << ',' << r.empirical_correctness << ',';
    cell(r.cer_h);
    os << ',';
    cell(r.ser_p);
    os << ',';
    cell(r.dialect_acc);
    os << '\n';
  }
}

}  // namespace tk::decode
