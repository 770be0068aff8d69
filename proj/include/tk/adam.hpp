#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tk/tensor.hpp"

namespace tk {

template <typename Scalar>
struct AdamState {
  Scalar lr = Scalar(0.01);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.98);
  Scalar eps = Scalar(1e-8);
  long step = 0;
  std::vector<Mat<Scalar>> m;
  std::vector<Mat<Scalar>> v;
};

// One bias-corrected Adam update over `params`; gradients are zeroed
// afterwards. Moment buffers are created on the first call and must keep
// matching the parameter list on later calls.
template <typename Scalar>
void adam_step(std::span<Tensor<Scalar>* const> params, AdamState<Scalar>& state) {
  if (state.m.empty() && state.step == 0) {
    for (Tensor<Scalar>* p : params) {
      state.m.push_back(Mat<Scalar>::Zero(p->values().rows(), p->values().cols()));
      state.v.push_back(Mat<Scalar>::Zero(p->values().rows(), p->values().cols()));
    }
  }
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                        " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) {
      throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].rows() != params[i]->values().rows() || state.m[i].cols() != params[i]->values().cols()) {
      throw DimensionError("adam_step: moment shape does not match parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& p = *params[i];
    const Mat<Scalar>& g = p.grad();
    state.m[i] = state.beta1 * state.m[i] + (Scalar(1) - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (Scalar(1) - state.beta2) * g.cwiseProduct(g);
    p.values().array() -= state.lr * (state.m[i].array() / c1) /
                          ((state.v[i].array() / c2).sqrt() + state.eps);
    p.grad().setZero();
  }
}

template <typename Scalar>
void adam_step(std::vector<Tensor<Scalar>*>& params, AdamState<Scalar>& state) {
  adam_step(std::span<Tensor<Scalar>* const>(params.data(), params.size()), state);
}

}  // namespace tk
