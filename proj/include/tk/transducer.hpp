#pragma once

#include <memory>
#include <span>
#include <vector>

#include "tk/lattice.hpp"
#include "tk/ops.hpp"

namespace tk::transducer {

// Joint network weights bound on a graph: project-add-tanh-project.
template <typename Scalar>
struct JointVars {
  Var<Scalar> enc_w;   // D x J
  Var<Scalar> enc_b;   // 1 x J
  Var<Scalar> pred_w;  // D x J
  Var<Scalar> out_w;   // J x V_ext
  Var<Scalar> out_b;   // 1 x V_ext
};

// Log-probability lattice for all (t, u): (T' * (U+1)) x V_ext, row t*(U+1)+u.
template <typename Scalar>
Var<Scalar> joint_forward(Var<Scalar> h_enc, Var<Scalar> h_pred, const JointVars<Scalar>& p) {
  if (h_enc.cols() != h_pred.cols()) {
    throw DimensionError("joint_forward: encoder width " + std::to_string(h_enc.cols()) +
                         " does not match predictor width " + std::to_string(h_pred.cols()));
  }
  Var<Scalar> a = add_bias(matmul(h_enc, p.enc_w), p.enc_b);
  Var<Scalar> b = matmul(h_pred, p.pred_w);
  Var<Scalar> hidden = tanh(outer_add(a, b));
  return log_softmax(add_bias(matmul(hidden, p.out_w), p.out_b), 1);
}

// Same network evaluated only at band nodes (t, start[t] + k).
template <typename Scalar>
Var<Scalar> joint_forward_band(Var<Scalar> h_enc, Var<Scalar> h_pred, const JointVars<Scalar>& p,
                               const PruneRange& range) {
  const Index T = h_enc.rows();
  const Index U = h_pred.rows() - 1;
  validate_range(range, T, U);
  const Index w = range.width(U);
  std::vector<int> t_idx, u_idx;
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < w; ++k) {
      t_idx.push_back(static_cast<int>(t));
      u_idx.push_back(static_cast<int>(range.start[static_cast<std::size_t>(t)] + k));
    }
  }
  Var<Scalar> a = add_bias(matmul(h_enc, p.enc_w), p.enc_b);
  Var<Scalar> b = matmul(h_pred, p.pred_w);
  Var<Scalar> hidden = tanh(add(gather_rows(a, std::span<const int>(t_idx)), gather_rows(b, std::span<const int>(u_idx))));
  return log_softmax(add_bias(matmul(hidden, p.out_w), p.out_b), 1);
}

// Records the exact transducer loss of a lattice as a scalar graph node.
template <typename Scalar>
Var<Scalar> rnnt_loss_node(Var<Scalar> logprobs, Index frames, std::span<const int> y, int blank = kBlank,
                           bool* finite = nullptr) {
  const Index U = static_cast<Index>(y.size());
  JointLogProbGrid<Scalar> grid(frames, U, logprobs.cols(), logprobs.value());
  LossResult<Scalar> r = rnnt_loss_full(grid, y, blank, logprobs.graph->needs_grad(logprobs.id));
  if (finite) *finite = r.finite;
  Mat<Scalar> v(1, 1);
  v(0, 0) = r.loss;
  auto grad = std::make_shared<Mat<Scalar>>(std::move(r.grad_logprobs));
  return logprobs.graph->record(std::move(v), {logprobs.id}, [logprobs, grad](Graph<Scalar>& g, int self) {
    g.grad_of(logprobs.id) += g.grad(self)(0, 0) * (*grad);
  });
}

// Pruned counterpart: `band` comes from joint_forward_band for `range`.
template <typename Scalar>
Var<Scalar> rnnt_loss_pruned_node(Var<Scalar> band, const PruneRange& range, std::span<const int> y,
                                  int blank = kBlank, bool* finite = nullptr) {
  GridFactory<Scalar> factory = [&band](const PruneRange&) { return band.value(); };
  LossResult<Scalar> r = rnnt_loss_pruned(factory, range, y, blank, band.graph->needs_grad(band.id));
  if (finite) *finite = r.finite;
  Mat<Scalar> v(1, 1);
  v(0, 0) = r.loss;
  auto grad = std::make_shared<Mat<Scalar>>(std::move(r.grad_logprobs));
  return band.graph->record(std::move(v), {band.id}, [band, grad](Graph<Scalar>& g, int self) {
    g.grad_of(band.id) += g.grad(self)(0, 0) * (*grad);
  });
}

}  // namespace tk::transducer
