#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tk/graph.hpp"

namespace tk {

// Relative gradient error as max |analytic - numeric| / max(1, |analytic|)
// over the checked components, numeric being the central difference.

template <typename Scalar>
using ParamLoss = std::function<Var<Scalar>(Graph<Scalar>&)>;

namespace detail {

template <typename Scalar>
Scalar eval_scalar(const ParamLoss<Scalar>& f) {
  Graph<Scalar> g;
  const Scalar v = f(g).item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace detail

// Checks d f / d p for every tensor in `params` (which `f` must bind via
// Graph::param). When `max_per_tensor` > 0 only that many randomly chosen
// components of each tensor are perturbed.
template <typename Scalar>
Scalar grad_check_params(const ParamLoss<Scalar>& f, const std::vector<Tensor<Scalar>*>& params,
                         Scalar eps, Index max_per_tensor = -1, unsigned seed = 7) {
  if (!(eps > Scalar(0))) throw NumericError("grad_check: eps must be positive");
  std::vector<bool> saved_flags;
  for (Tensor<Scalar>* p : params) {
    saved_flags.push_back(p->requires_grad());
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Graph<Scalar> g;
    Var<Scalar> loss = f(g);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: function value is not finite");
    g.backward(loss);
  }
  std::mt19937 rng(seed);
  Scalar worst = 0;
  for (Tensor<Scalar>* p : params) {
    const Mat<Scalar> analytic = p->grad();
    std::vector<Index> idx(static_cast<std::size_t>(p->size()));
    for (Index i = 0; i < p->size(); ++i) idx[static_cast<std::size_t>(i)] = i;
    if (max_per_tensor > 0 && p->size() > max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(max_per_tensor));
    }
    for (Index i : idx) {
      Scalar& slot = p->data()[i];
      const Scalar orig = slot;
      slot = orig + eps;
      const Scalar up = detail::eval_scalar(f);
      slot = orig - eps;
      const Scalar down = detail::eval_scalar(f);
      slot = orig;
      const Scalar numeric = (up - down) / (Scalar(2) * eps);
      const Scalar a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(Scalar(1), std::abs(a)));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->set_requires_grad(saved_flags[i]);
    params[i]->drop_grad();
  }
  return worst;
}

// Single-input form: f receives x bound as a parameter leaf.
template <typename Scalar>
Scalar grad_check(const std::function<Var<Scalar>(Graph<Scalar>&, Var<Scalar>)>& f,
                  const Tensor<Scalar>& x, Scalar eps) {
  Tensor<Scalar> probe = x;
  ParamLoss<Scalar> bound = [&](Graph<Scalar>& g) { return f(g, g.param(probe)); };
  return grad_check_params<Scalar>(bound, {&probe}, eps);
}

}  // namespace tk
