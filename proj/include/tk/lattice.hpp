#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tk/tensor.hpp"

namespace tk::transducer {

inline constexpr int kBlank = 0;

// Stand-in for an infinite loss (no alignment with non-zero probability).
// Paired with zero gradients so that batch updates stay finite.
inline constexpr double kInfiniteLoss = 1e30;

// Per-utterance joint output: row (t * (U + 1) + u) holds the log-distribution
// over the extended vocabulary at lattice node (t, u).
template <typename Scalar>
struct JointLogProbGrid {
  Index frames = 0;      // T'
  Index target_len = 0;  // U
  Index vocab = 0;       // V_ext
  Mat<Scalar> logprobs;

  JointLogProbGrid() = default;
  JointLogProbGrid(Index t, Index u, Index v, Mat<Scalar> lp)
      : frames(t), target_len(u), vocab(v), logprobs(std::move(lp)) {
    if (logprobs.rows() != t * (u + 1) || logprobs.cols() != v) {
      throw DimensionError("JointLogProbGrid: expected " + std::to_string(t * (u + 1)) + "x" +
                           std::to_string(v) + " log-probs, got " + std::to_string(logprobs.rows()) +
                           "x" + std::to_string(logprobs.cols()));
    }
  }

  Index row(Index t, Index u) const { return t * (target_len + 1) + u; }
  Scalar at(Index t, Index u, Index v) const { return logprobs(row(t, u), v); }
};

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  bool finite = true;
  Mat<Scalar> grad_logprobs;  // empty unless requested
};

// Band of the u-axis kept at each frame: nodes (t, start[t] .. start[t]+w-1)
// with w = min(s_range, U + 1).
struct PruneRange {
  std::vector<Index> start;
  Index s_range = 1;

  Index width(Index target_len) const { return std::min(s_range, target_len + 1); }
};

namespace detail {

template <typename Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  if (a == neg_inf<Scalar>()) return b;
  if (b == neg_inf<Scalar>()) return a;
  const Scalar m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Forward-backward over a T x (U+1) lattice given per-node transition
// log-probs. blank(t,u) moves to (t+1,u) or terminates at (T-1,U);
// emit(t,u) moves to (t,u+1). Missing transitions are -inf.
template <typename Scalar>
struct LatticeDP {
  Index T = 0, U = 0;
  Mat<Scalar> blank, emit;  // T x (U+1)
  Mat<Scalar> alpha, beta;
  Scalar log_z = 0;

  void run() {
    const Scalar ninf = neg_inf<Scalar>();
    alpha = Mat<Scalar>::Constant(T, U + 1, ninf);
    beta = Mat<Scalar>::Constant(T, U + 1, ninf);
    for (Index t = 0; t < T; ++t) {
      for (Index u = 0; u <= U; ++u) {
        if (t == 0 && u == 0) {
          alpha(0, 0) = 0;
          continue;
        }
        Scalar a = ninf;
        if (t > 0) a = alpha(t - 1, u) + blank(t - 1, u);
        if (u > 0) a = log_add(a, alpha(t, u - 1) + emit(t, u - 1));
        alpha(t, u) = a;
      }
    }
    log_z = alpha(T - 1, U) + blank(T - 1, U);
    for (Index t = T - 1; t >= 0; --t) {
      for (Index u = U; u >= 0; --u) {
        if (t == T - 1 && u == U) {
          beta(t, u) = blank(t, u);
          continue;
        }
        Scalar b = ninf;
        if (t + 1 < T) b = beta(t + 1, u) + blank(t, u);
        if (u < U) b = log_add(b, beta(t, u + 1) + emit(t, u));
        beta(t, u) = b;
      }
    }
  }

  bool finite() const { return std::isfinite(log_z); }

  // d(-log Z)/d blank(t,u) and d(-log Z)/d emit(t,u).
  Scalar grad_blank(Index t, Index u) const {
    Scalar next;
    if (t + 1 < T) {
      next = beta(t + 1, u);
    } else if (u == U) {
      next = 0;
    } else {
      return 0;
    }
    const Scalar lp = alpha(t, u) + blank(t, u) + next - log_z;
    return lp == neg_inf<Scalar>() ? Scalar(0) : -std::exp(lp);
  }

  Scalar grad_emit(Index t, Index u) const {
    if (u >= U) return 0;
    const Scalar lp = alpha(t, u) + emit(t, u) + beta(t, u + 1) - log_z;
    return lp == neg_inf<Scalar>() ? Scalar(0) : -std::exp(lp);
  }

  Scalar occupancy(Index t, Index u) const {
    const Scalar lp = alpha(t, u) + beta(t, u) - log_z;
    return lp == neg_inf<Scalar>() ? Scalar(0) : std::exp(lp);
  }
};

inline void check_targets(std::span<const int> y, int blank, Index frames) {
  for (int tok : y) {
    if (tok == blank) throw ContractError("transducer loss: target sequence contains the blank id");
  }
  if (frames < 1) {
    throw ContractError("transducer loss: need at least one frame (U=" + std::to_string(y.size()) + ")");
  }
}

}  // namespace detail

// Exact transducer loss: -log of the total probability of all monotone
// alignments from (0,0) to the terminal blank at (T'-1, U).
template <typename Scalar>
LossResult<Scalar> rnnt_loss_full(const JointLogProbGrid<Scalar>& grid, std::span<const int> y,
                                  int blank = kBlank, bool want_grad = true) {
  detail::check_targets(y, blank, grid.frames);
  const Index U = static_cast<Index>(y.size());
  if (U != grid.target_len) {
    throw DimensionError("rnnt_loss_full: grid built for U=" + std::to_string(grid.target_len) +
                         ", target has " + std::to_string(U) + " tokens");
  }
  for (int tok : y) {
    if (tok < 0 || tok >= grid.vocab) throw IndexError("rnnt_loss_full: token id outside vocabulary");
  }
  detail::LatticeDP<Scalar> dp;
  dp.T = grid.frames;
  dp.U = U;
  dp.blank.resize(dp.T, U + 1);
  dp.emit = Mat<Scalar>::Constant(dp.T, U + 1, detail::neg_inf<Scalar>());
  for (Index t = 0; t < dp.T; ++t) {
    for (Index u = 0; u <= U; ++u) {
      dp.blank(t, u) = grid.at(t, u, blank);
      if (u < U) dp.emit(t, u) = grid.at(t, u, y[static_cast<std::size_t>(u)]);
    }
  }
  dp.run();

  LossResult<Scalar> r;
  if (want_grad) r.grad_logprobs = Mat<Scalar>::Zero(grid.logprobs.rows(), grid.logprobs.cols());
  if (!dp.finite()) {
    r.loss = static_cast<Scalar>(kInfiniteLoss);
    r.finite = false;
    return r;
  }
  r.loss = -dp.log_z;
  if (want_grad) {
    for (Index t = 0; t < dp.T; ++t) {
      for (Index u = 0; u <= U; ++u) {
        r.grad_logprobs(grid.row(t, u), blank) += dp.grad_blank(t, u);
        if (u < U) r.grad_logprobs(grid.row(t, u), y[static_cast<std::size_t>(u)]) += dp.grad_emit(t, u);
      }
    }
  }
  return r;
}

// Brute-force oracle: enumerates every alignment path explicitly.
template <typename Scalar>
Scalar enumerate_alignments(const JointLogProbGrid<Scalar>& grid, std::span<const int> y, int blank = kBlank,
                            double max_paths = 1e6) {
  detail::check_targets(y, blank, grid.frames);
  const Index T = grid.frames;
  const Index U = static_cast<Index>(y.size());
  if (U != grid.target_len) throw DimensionError("enumerate_alignments: target length does not match grid");
  // Paths interleave T-1 non-final blanks with U emissions.
  double paths = 1;
  for (Index k = 1; k <= U; ++k) paths = paths * static_cast<double>(T - 1 + k) / static_cast<double>(k);
  if (paths > max_paths) {
    throw SizeError("enumerate_alignments: " + std::to_string(paths) + " paths exceed the guard of " +
                    std::to_string(max_paths));
  }
  std::vector<Scalar> path_logps;
  std::function<void(Index, Index, Scalar)> walk = [&](Index t, Index u, Scalar acc) {
    if (t == T - 1 && u == U) {
      path_logps.push_back(acc + grid.at(t, u, blank));
      return;
    }
    if (u < U) walk(t, u + 1, acc + grid.at(t, u, y[static_cast<std::size_t>(u)]));
    if (t + 1 < T) walk(t + 1, u, acc + grid.at(t, u, blank));
  };
  walk(0, 0, Scalar(0));
  Scalar mx = detail::neg_inf<Scalar>();
  for (Scalar v : path_logps) mx = std::max(mx, v);
  if (mx == detail::neg_inf<Scalar>()) return std::numeric_limits<Scalar>::infinity();
  Scalar s = 0;
  for (Scalar v : path_logps) s += std::exp(v - mx);
  return -(mx + std::log(s));
}

inline void validate_range(const PruneRange& range, Index frames, Index target_len) {
  if (range.s_range < 1) throw ContractError("prune range: s_range must be >= 1");
  if (static_cast<Index>(range.start.size()) != frames) {
    throw ContractError("prune range: " + std::to_string(range.start.size()) + " starts for " +
                        std::to_string(frames) + " frames");
  }
  const Index w = range.width(target_len);
  for (std::size_t t = 0; t < range.start.size(); ++t) {
    if (range.start[t] < 0 || range.start[t] > target_len + 1 - w) {
      throw ContractError("prune range: start[" + std::to_string(t) + "]=" + std::to_string(range.start[t]) +
                          " outside [0," + std::to_string(target_len + 1 - w) + "]");
    }
    if (t > 0 && range.start[t] < range.start[t - 1]) {
      throw ContractError("prune range: start decreases at frame " + std::to_string(t));
    }
  }
}

// Produces the band log-probs for a range: (T' * w) x V_ext, row (t * w + k)
// being lattice node (t, start[t] + k).
template <typename Scalar>
using GridFactory = std::function<Mat<Scalar>(const PruneRange&)>;

// Transducer loss restricted to the band; gradients are band-shaped.
template <typename Scalar>
LossResult<Scalar> rnnt_loss_pruned(const GridFactory<Scalar>& factory, const PruneRange& range,
                                    std::span<const int> y, int blank = kBlank, bool want_grad = true) {
  const Index T = static_cast<Index>(range.start.size());
  const Index U = static_cast<Index>(y.size());
  detail::check_targets(y, blank, T);
  validate_range(range, T, U);
  const Index w = range.width(U);
  const Mat<Scalar> band = factory(range);
  if (band.rows() != T * w) {
    throw DimensionError("rnnt_loss_pruned: factory returned " + std::to_string(band.rows()) +
                         " rows, expected " + std::to_string(T * w));
  }
  for (int tok : y) {
    if (tok < 0 || tok >= band.cols()) throw IndexError("rnnt_loss_pruned: token id outside vocabulary");
  }
  const Scalar ninf = detail::neg_inf<Scalar>();
  detail::LatticeDP<Scalar> dp;
  dp.T = T;
  dp.U = U;
  dp.blank = Mat<Scalar>::Constant(T, U + 1, ninf);
  dp.emit = Mat<Scalar>::Constant(T, U + 1, ninf);
  auto in_band = [&](Index t, Index u) { return u >= range.start[t] && u < range.start[t] + w; };
  for (Index t = 0; t < T; ++t) {
    for (Index k = 0; k < w; ++k) {
      const Index u = range.start[t] + k;
      const Index row = t * w + k;
      if (t + 1 < T ? in_band(t + 1, u) : u == U) dp.blank(t, u) = band(row, blank);
      if (u < U && in_band(t, u + 1)) dp.emit(t, u) = band(row, y[static_cast<std::size_t>(u)]);
    }
  }
  dp.run();

  LossResult<Scalar> r;
  if (want_grad) r.grad_logprobs = Mat<Scalar>::Zero(band.rows(), band.cols());
  if (!dp.finite()) {
    r.loss = static_cast<Scalar>(kInfiniteLoss);
    r.finite = false;
    return r;
  }
  r.loss = -dp.log_z;
  if (want_grad) {
    for (Index t = 0; t < T; ++t) {
      for (Index k = 0; k < w; ++k) {
        const Index u = range.start[t] + k;
        const Index row = t * w + k;
        r.grad_logprobs(row, blank) += dp.grad_blank(t, u);
        if (u < U) r.grad_logprobs(row, y[static_cast<std::size_t>(u)]) += dp.grad_emit(t, u);
      }
    }
  }
  return r;
}

// Chooses a monotone band of width s_range around the occupation ridge of the
// additive lattice log_softmax(am[t] + lm[u]).
template <typename Scalar>
PruneRange compute_prune_range(const Mat<Scalar>& simple_am, const Mat<Scalar>& simple_lm,
                               std::span<const int> y, Index s_range, int blank = kBlank) {
  if (s_range < 1) throw ContractError("compute_prune_range: s_range must be >= 1");
  const Index T = simple_am.rows();
  const Index U = static_cast<Index>(y.size());
  detail::check_targets(y, blank, T);
  if (simple_lm.rows() != U + 1 || simple_lm.cols() != simple_am.cols()) {
    throw DimensionError("compute_prune_range: lm scores must be (U+1) x V matching am");
  }
  detail::LatticeDP<Scalar> dp;
  dp.T = T;
  dp.U = U;
  dp.blank.resize(T, U + 1);
  dp.emit = Mat<Scalar>::Constant(T, U + 1, detail::neg_inf<Scalar>());
  for (Index t = 0; t < T; ++t) {
    for (Index u = 0; u <= U; ++u) {
      const auto joint = (simple_am.row(t) + simple_lm.row(u)).eval();
      const Scalar mx = joint.maxCoeff();
      const Scalar lse = mx + std::log((joint.array() - mx).exp().sum());
      dp.blank(t, u) = joint(blank) - lse;
      if (u < U) dp.emit(t, u) = joint(y[static_cast<std::size_t>(u)]) - lse;
    }
  }
  dp.run();

  PruneRange range;
  range.s_range = s_range;
  const Index w = range.width(U);
  const Index last = U + 1 - w;
  range.start.assign(static_cast<std::size_t>(T), 0);
  if (w == U + 1) return range;

  for (Index t = 0; t < T; ++t) {
    Scalar best = -1;
    Index best_s = 0;
    for (Index s0 = 0; s0 <= last; ++s0) {
      Scalar mass = 0;
      if (dp.finite()) {
        for (Index k = 0; k < w; ++k) mass += dp.occupancy(t, s0 + k);
      }
      if (mass > best + Scalar(1e-12)) {
        best = mass;
        best_s = s0;
      }
    }
    range.start[static_cast<std::size_t>(t)] = best_s;
  }
  // Forward pass: origin included, monotone, consecutive bands overlap.
  auto& st = range.start;
  if (T > 1) st[0] = 0;
  for (Index t = 1; t < T; ++t) {
    st[t] = std::clamp(st[t], st[t - 1], std::min(st[t - 1] + w - 1, last));
  }
  // Backward pass: the terminal node is always kept.
  st[T - 1] = last;
  for (Index t = T - 2; t >= 0; --t) {
    st[t] = std::clamp(st[t], std::max<Index>(0, st[t + 1] - (w - 1)), st[t + 1]);
  }
  return range;
}

}  // namespace tk::transducer
