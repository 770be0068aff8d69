#include "tk/model.hpp"

#include <cmath>
#include <random>

namespace tk::model {

std::string task_name(Task t) { return t == Task::kH ? "H" : "P"; }

Mat<Real> subsample_windows(const Mat<Real>& features, Index factor) {
  const Index T0 = features.rows(), F = features.cols();
  const Index T = T0 / factor;
  const Index span = kSubsampleKernel * factor;
  const Index lead = (kSubsampleKernel - 1) / 2 * factor;
  Mat<Real> out = Mat<Real>::Zero(T, span * F);
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < span; ++j) {
      const Index src = t * factor - lead + j;
      if (src >= 0 && src < T0) out.block(t, j * F, 1, F) = features.row(src);
    }
  }
  return out;
}

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* key) {
    if (v < 1) throw ConfigError(std::string(key) + " must be >= 1, got " + std::to_string(v));
  };
  positive(encoder.input_dim, "model.input_dim");
  positive(encoder.model_dim, "model.encoder_dim");
  positive(encoder.subsample_factor, "model.subsample");
  positive(encoder.ff_dim, "model.ff_dim");
  if (encoder.num_blocks < 0) throw ConfigError("model.num_blocks must be >= 0");
  if (predictor.context_size != 1 && predictor.context_size != 2) {
    throw ConfigError("model.context_size must be 1 or 2, got " + std::to_string(predictor.context_size));
  }
  positive(predictor.embed_dim, "model.embed_dim");
  positive(joint_dim, "model.joint_dim");
  positive(s_range, "model.s_range");
  if (!task_h && !task_p) throw ConfigError("model.task must enable at least one decoder");
  if (num_dialects < 1) throw ConfigError("number of dialects must be >= 1");
  if (lambda < 0) throw ConfigError("dialect.lambda must be non-negative");
  if (weight_h < 0 || weight_p < 0) throw ConfigError("task weights must be non-negative");
  if (simple_loss_scale < 0) throw ConfigError("model.simple_loss_scale must be non-negative");
}

MultiTaskModel::MultiTaskModel(ModelConfig cfg, int base_vocab_h, int base_vocab_p, std::uint64_t seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int k = cfg_.extended_vocab() ? cfg_.num_dialects : 0;
  if (cfg_.task_h) vocab_h_ = dialect::extend_vocab(base_vocab_h, k);
  if (cfg_.task_p) vocab_p_ = dialect::extend_vocab(base_vocab_p, k);

  std::mt19937_64 rng(seed);
  const Index F = cfg_.encoder.input_dim;
  const Index D = cfg_.encoder.model_dim;
  const Index S = cfg_.encoder.subsample_factor;
  const Index FF = cfg_.encoder.ff_dim;
  const Index J = cfg_.joint_dim;
  const Index E = cfg_.predictor.embed_dim;
  const Index C = cfg_.predictor.context_size;
  auto& P = params_;

  P.add_uniform("enc.in.w", {kSubsampleKernel * S * F, D}, kSubsampleKernel * S * F, rng);
  P.add_constant("enc.in.b", {1, D}, 0.0);
  for (Index b = 0; b < cfg_.encoder.num_blocks; ++b) {
    const std::string n = "enc.b" + std::to_string(b) + ".";
    P.add_constant(n + "ln1.g", {1, D}, 1.0);
    P.add_constant(n + "ln1.b", {1, D}, 0.0);
    for (const char* m : {"attn.q", "attn.k", "attn.v", "attn.o"}) P.add_uniform(n + m, {D, D}, D, rng);
    P.add_constant(n + "ln2.g", {1, D}, 1.0);
    P.add_constant(n + "ln2.b", {1, D}, 0.0);
    P.add_uniform(n + "ff.w1", {D, FF}, D, rng);
    P.add_constant(n + "ff.b1", {1, FF}, 0.0);
    P.add_uniform(n + "ff.w2", {FF, D}, FF, rng);
    P.add_constant(n + "ff.b2", {1, D}, 0.0);
  }
  P.add_constant("enc.out_ln.g", {1, D}, 1.0);
  P.add_constant("enc.out_ln.b", {1, D}, 0.0);

  for (Task t : {Task::kH, Task::kP}) {
    if (!has_task(t)) continue;
    const std::string n = prefix(t) + ".";
    const Index Vx = vocab(t).extended();
    P.add_uniform(n + "pred.embed", {Vx, E}, 1, rng);
    P.add_uniform(n + "pred.w", {C * E, D}, C * E, rng);
    P.add_constant(n + "pred.b", {1, D}, 0.0);
    P.add_uniform(n + "joint.enc_w", {D, J}, D, rng);
    P.add_constant(n + "joint.enc_b", {1, J}, 0.0);
    P.add_uniform(n + "joint.pred_w", {D, J}, D, rng);
    P.add_uniform(n + "joint.out_w", {J, Vx}, J, rng);
    P.add_constant(n + "joint.out_b", {1, Vx}, 0.0);
    if (cfg_.loss == LossKind::kPruned) {
      P.add_uniform(n + "simple.am_w", {D, Vx}, D, rng);
      P.add_uniform(n + "simple.lm_w", {D, Vx}, D, rng);
    }
  }
  if (cfg_.mode.adc) {
    P.add_uniform("adc.query", {1, D}, D, rng);
    P.add_uniform("adc.key", {D, D}, D, rng);
    P.add_uniform("adc.out", {D, cfg_.num_dialects}, D, rng);
  }
  if (cfg_.mode.dii) P.add_uniform("dii.embed", {cfg_.num_dialects, D}, 1, rng);
}

// Shared implementations; Self is MultiTaskModel or const MultiTaskModel, and
// the constness picks trainable or read-only parameter binding.
template <typename Self>
struct ModelAccess {
  static V bind(Self& m, G& g, const std::string& name) { return g.param(m.params_.at(name)); }

  static V attention(Self& m, G& g, V x, const std::string& n) {
    const Real scale = 1.0 / std::sqrt(static_cast<Real>(x.cols()));
    V q = matmul(x, bind(m, g, n + "attn.q"));
    V k = matmul(x, bind(m, g, n + "attn.k"));
    V v = matmul(x, bind(m, g, n + "attn.v"));
    V w = softmax(tk::scale(matmul(q, transpose(k)), scale), 1);
    return matmul(matmul(w, v), bind(m, g, n + "attn.o"));
  }

  static V encode(Self& m, G& g, const Mat<Real>& features) {
    const auto& ec = m.cfg_.encoder;
    if (features.rows() == 0) throw DataError("encode: utterance has no frames");
    if (features.cols() != ec.input_dim) {
      throw DimensionError("encode: expected " + std::to_string(ec.input_dim) + " features per frame, got " +
                           std::to_string(features.cols()));
    }
    if (features.rows() < ec.subsample_factor) {
      throw DataError("encode: " + std::to_string(features.rows()) + " frames is shorter than subsampling factor " +
                      std::to_string(ec.subsample_factor));
    }
    V x = g.constant(subsample_windows(features, ec.subsample_factor));
    x = relu(add_bias(matmul(x, bind(m, g, "enc.in.w")), bind(m, g, "enc.in.b")));
    for (Index b = 0; b < ec.num_blocks; ++b) {
      const std::string n = "enc.b" + std::to_string(b) + ".";
      V a = layer_norm(x, bind(m, g, n + "ln1.g"), bind(m, g, n + "ln1.b"));
      x = add(x, attention(m, g, a, n));
      V f = layer_norm(x, bind(m, g, n + "ln2.g"), bind(m, g, n + "ln2.b"));
      f = relu(add_bias(matmul(f, bind(m, g, n + "ff.w1")), bind(m, g, n + "ff.b1")));
      f = add_bias(matmul(f, bind(m, g, n + "ff.w2")), bind(m, g, n + "ff.b2"));
      x = add(x, f);
    }
    return layer_norm(x, bind(m, g, "enc.out_ln.g"), bind(m, g, "enc.out_ln.b"));
  }

  // Rows of `ctx` are flattened context windows (c ids each).
  static V predict_rows(Self& m, G& g, Task t, const std::vector<int>& ids, Index rows) {
    const std::string n = m.prefix(t) + ".";
    const Index c = m.cfg_.predictor.context_size;
    V table = bind(m, g, n + "pred.embed");
    std::vector<V> cols;
    for (Index j = 0; j < c; ++j) {
      std::vector<int> col(static_cast<std::size_t>(rows));
      for (Index r = 0; r < rows; ++r) col[static_cast<std::size_t>(r)] = ids[static_cast<std::size_t>(r * c + j)];
      cols.push_back(embedding_lookup(table, std::span<const int>(col)));
    }
    V e = cols.size() == 1 ? cols[0] : concat(cols, 1);
    return relu(add_bias(matmul(e, bind(m, g, n + "pred.w")), bind(m, g, n + "pred.b")));
  }

  static void require_task(Self& m, Task t) {
    if (!m.has_task(t)) throw ContractError("model has no " + task_name(t) + " decoder");
  }

  static V predict(Self& m, G& g, Task t, std::span<const int> history) {
    require_task(m, t);
    std::vector<int> ids = m.context_ids(t, history);
    return predict_rows(m, g, t, ids, 1);
  }

  static V predict_targets(Self& m, G& g, Task t, std::span<const int> targets) {
    require_task(m, t);
    std::vector<int> ids;
    for (std::size_t u = 0; u <= targets.size(); ++u) {
      std::vector<int> ctx = m.context_ids(t, targets.subspan(0, u));
      ids.insert(ids.end(), ctx.begin(), ctx.end());
    }
    return predict_rows(m, g, t, ids, static_cast<Index>(targets.size()) + 1);
  }

  static transducer::JointVars<Real> joint(Self& m, G& g, Task t) {
    require_task(m, t);
    const std::string n = m.prefix(t) + ".joint.";
    return {bind(m, g, n + "enc_w"), bind(m, g, n + "enc_b"), bind(m, g, n + "pred_w"), bind(m, g, n + "out_w"),
            bind(m, g, n + "out_b")};
  }

  static dialect::AdcVars adc(Self& m, G& g) {
    if (!m.cfg_.mode.adc) throw ContractError("model has no dialect classifier");
    return {bind(m, g, "adc.query"), bind(m, g, "adc.key"), bind(m, g, "adc.out")};
  }

  static V dii(Self& m, G& g) {
    if (!m.cfg_.mode.dii) throw ContractError("model has no dialect identity input");
    return bind(m, g, "dii.embed");
  }
};

using Mut = ModelAccess<MultiTaskModel>;
using Ro = ModelAccess<const MultiTaskModel>;

V MultiTaskModel::encode(G& g, const Mat<Real>& f) { return Mut::encode(*this, g, f); }
V MultiTaskModel::encode(G& g, const Mat<Real>& f) const { return Ro::encode(*this, g, f); }
V MultiTaskModel::predict(G& g, Task t, std::span<const int> h) { return Mut::predict(*this, g, t, h); }
V MultiTaskModel::predict(G& g, Task t, std::span<const int> h) const { return Ro::predict(*this, g, t, h); }
V MultiTaskModel::predict_targets(G& g, Task t, std::span<const int> y) { return Mut::predict_targets(*this, g, t, y); }
V MultiTaskModel::predict_targets(G& g, Task t, std::span<const int> y) const {
  return Ro::predict_targets(*this, g, t, y);
}
transducer::JointVars<Real> MultiTaskModel::joint_vars(G& g, Task t) { return Mut::joint(*this, g, t); }
transducer::JointVars<Real> MultiTaskModel::joint_vars(G& g, Task t) const { return Ro::joint(*this, g, t); }
dialect::AdcVars MultiTaskModel::adc_vars(G& g) { return Mut::adc(*this, g); }
dialect::AdcVars MultiTaskModel::adc_vars(G& g) const { return Ro::adc(*this, g); }
V MultiTaskModel::dii_table(G& g) { return Mut::dii(*this, g); }
V MultiTaskModel::dii_table(G& g) const { return Ro::dii(*this, g); }
V MultiTaskModel::simple_am_w(G& g, Task t) { return g.param(params_.at(prefix(t) + ".simple.am_w")); }
V MultiTaskModel::simple_lm_w(G& g, Task t) { return g.param(params_.at(prefix(t) + ".simple.lm_w")); }

std::vector<int> MultiTaskModel::context_ids(Task t, std::span<const int> history) const {
  const int c = cfg_.predictor.context_size;
  const int vx = vocab(t).extended();
  std::vector<int> ids(static_cast<std::size_t>(c), transducer::kBlank);
  const std::size_t n = history.size();
  for (int j = 0; j < c; ++j) {
    const std::size_t back = static_cast<std::size_t>(c - j);
    if (back > n) continue;
    const int tok = history[n - back];
    if (tok < 0 || tok >= vx) {
      throw IndexError("predictor: token id " + std::to_string(tok) + " outside vocabulary of size " +
                       std::to_string(vx));
    }
    ids[static_cast<std::size_t>(j)] = tok;
  }
  return ids;
}

std::vector<int> task_targets(const MultiTaskModel& model, Task t, const Example& ex) {
  const auto& y = t == Task::kH ? ex.target_h : ex.target_p;
  if (!y) throw DataError("utterance '" + ex.id + "' has no " + task_name(t) + " transcript");
  return dialect::condition_targets(*y, ex.dialect, model.config().mode.conditioning, model.vocab(t)).tokens;
}

namespace {

V task_loss(G& g, MultiTaskModel& model, Task t, V h_enc, std::span<const int> y, bool& finite) {
  const auto& cfg = model.config();
  V h_pred = model.predict_targets(g, t, y);
  transducer::JointVars<Real> jv = model.joint_vars(g, t);
  bool ok = true;
  if (cfg.loss == LossKind::kFull) {
    V lp = transducer::joint_forward(h_enc, h_pred, jv);
    V loss = transducer::rnnt_loss_node(lp, h_enc.rows(), y, transducer::kBlank, &ok);
    finite = finite && ok;
    return loss;
  }
  V am = matmul(h_enc, model.simple_am_w(g, t));
  V lm = matmul(h_pred, model.simple_lm_w(g, t));
  V simple_lp = log_softmax(outer_add(am, lm), 1);
  V simple = transducer::rnnt_loss_node(simple_lp, h_enc.rows(), y, transducer::kBlank, &ok);
  finite = finite && ok;
  transducer::PruneRange range = transducer::compute_prune_range(am.value(), lm.value(), y, cfg.s_range);
  V band = transducer::joint_forward_band(h_enc, h_pred, jv, range);
  V pruned = transducer::rnnt_loss_pruned_node(band, range, y, transducer::kBlank, &ok);
  finite = finite && ok;
  return add(pruned, scale(simple, cfg.simple_loss_scale));
}

}  // namespace

ForwardResult multitask_forward(G& g, MultiTaskModel& model, std::span<const Example* const> batch) {
  if (batch.empty()) throw ContractError("multitask_forward: empty batch");
  const auto& cfg = model.config();
  ForwardResult r;
  std::vector<V> per_utt;
  for (const Example* ex : batch) {
    if (ex->dialect < 0 || ex->dialect >= cfg.num_dialects) {
      throw IndexError("utterance '" + ex->id + "' has dialect index " + std::to_string(ex->dialect) +
                       " outside [0," + std::to_string(cfg.num_dialects) + ")");
    }
    V h = model.encode(g, ex->features);
    std::optional<V> la;
    if (cfg.mode.adc) {
      dialect::AdcOutput out = dialect::adc_forward(h, model.adc_vars(g));
      la = dialect::adc_loss(out.logits, ex->dialect);
      r.l_a += la->item();
    }
    if (cfg.mode.dii) h = dialect::dii_augment(h, ex->dialect, model.dii_table(g));

    std::vector<V> terms;
    for (Task t : {Task::kH, Task::kP}) {
      if (!model.has_task(t)) continue;
      std::vector<int> y = task_targets(model, t, *ex);
      V l = task_loss(g, model, t, h, y, r.finite);
      (t == Task::kH ? r.l_h : r.l_p) += l.item();
      const double w = t == Task::kH ? cfg.weight_h : cfg.weight_p;
      terms.push_back(w == 1.0 ? l : scale(l, w));
    }
    V asr = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) asr = add(asr, terms[i]);
    r.l_asr += asr.item();
    per_utt.push_back(la ? dialect::combine_losses(asr, *la, cfg.lambda) : asr);
  }
  V total = per_utt[0];
  for (std::size_t i = 1; i < per_utt.size(); ++i) total = add(total, per_utt[i]);
  const double n = static_cast<double>(batch.size());
  r.loss = scale(total, 1.0 / n);
  r.l_asr /= n;
  r.l_h /= n;
  r.l_p /= n;
  r.l_a /= n;
  r.l_final = r.loss.item();
  return r;
}

}  // namespace tk::model
