#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tk/graph.hpp"

// Differentiable primitives. Every op records its forward value and a gradient
// rule on the graph owning its inputs. Broadcasting is limited to add_bias.

namespace tk {

namespace detail {

template <typename Scalar>
void require_same_graph(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.graph != b.graph) throw ContractError(std::string(op) + ": inputs from different graphs");
}

inline std::string dims(const char* op, const std::string& a, const std::string& b) {
  return std::string(op) + ": incompatible shapes " + a + " and " + b;
}

template <typename Scalar>
Mat<Scalar> row_logsumexp(const Mat<Scalar>& m) {
  Mat<Scalar> out(m.rows(), 1);
  for (Index r = 0; r < m.rows(); ++r) {
    const Scalar mx = m.row(r).maxCoeff();
    if (!std::isfinite(mx)) {
      out(r, 0) = mx;
      continue;
    }
    out(r, 0) = mx + std::log((m.row(r).array() - mx).exp().sum());
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b, "matmul");
  if (a.cols() != b.rows()) throw DimensionError(detail::dims("matmul", a.shape_str(), b.shape_str()));
  Mat<Scalar> v = a.value() * b.value();
  return a.graph->record(std::move(v), {a.id, b.id}, [a, b](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    if (g.needs_grad(a.id)) g.grad_of(a.id).noalias() += G * g.value(b.id).transpose();
    if (g.needs_grad(b.id)) g.grad_of(b.id).noalias() += g.value(a.id).transpose() * G;
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(detail::dims("add", a.shape_str(), b.shape_str()));
  }
  Mat<Scalar> v = a.value() + b.value();
  return a.graph->record(std::move(v), {a.id, b.id}, [a, b](Graph<Scalar>& g, int self) {
    if (g.needs_grad(a.id)) g.grad_of(a.id) += g.grad(self);
    if (g.needs_grad(b.id)) g.grad_of(b.id) += g.grad(self);
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  Mat<Scalar> v = a.value() * c;
  return a.graph->record(std::move(v), {a.id}, [a, c](Graph<Scalar>& g, int self) {
    g.grad_of(a.id) += g.grad(self) * c;
  });
}

// Row vector `bias` (1 x m) added onto every row of `a` (n x m).
template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> a, Var<Scalar> bias) {
  detail::require_same_graph(a, bias, "add_bias");
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError(detail::dims("add_bias", a.shape_str(), bias.shape_str()));
  }
  Mat<Scalar> v = a.value().rowwise() + bias.value().row(0);
  return a.graph->record(std::move(v), {a.id, bias.id}, [a, bias](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    if (g.needs_grad(a.id)) g.grad_of(a.id) += G;
    if (g.needs_grad(bias.id)) g.grad_of(bias.id) += G.colwise().sum();
  });
}

// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(detail::dims("mul", a.shape_str(), b.shape_str()));
  }
  Mat<Scalar> v = a.value().cwiseProduct(b.value());
  return a.graph->record(std::move(v), {a.id, b.id}, [a, b](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    if (g.needs_grad(a.id)) g.grad_of(a.id) += G.cwiseProduct(g.value(b.id));
    if (g.needs_grad(b.id)) g.grad_of(b.id) += G.cwiseProduct(g.value(a.id));
  });
}

// Concatenation along rows (axis 0) or columns (axis 1).
template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
  Graph<Scalar>* graph = parts.front().graph;
  Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    detail::require_same_graph(parts.front(), p, "concat");
    if (axis == 0) {
      if (p.cols() != parts.front().cols()) {
        throw DimensionError(detail::dims("concat", parts.front().shape_str(), p.shape_str()));
      }
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts.front().rows()) {
        throw DimensionError(detail::dims("concat", parts.front().shape_str(), p.shape_str()));
      }
      cols += p.cols();
      rows = p.rows();
    }
  }
  Mat<Scalar> v(rows, cols);
  std::vector<int> ids;
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      v.middleRows(off, p.rows()) = p.value();
      offsets.push_back(off);
      off += p.rows();
    } else {
      v.middleCols(off, p.cols()) = p.value();
      offsets.push_back(off);
      off += p.cols();
    }
    ids.push_back(p.id);
  }
  return graph->record(std::move(v), ids, [ids, offsets, axis](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!g.needs_grad(ids[i])) continue;
      Mat<Scalar>& dst = g.grad_of(ids[i]);
      if (axis == 0) {
        dst += G.middleRows(offsets[i], dst.rows());
      } else {
        dst += G.middleCols(offsets[i], dst.cols());
      }
    }
  });
}

// Rows of `table` selected by `ids`, in order. Also serves as a row gather.
template <typename Scalar>
Var<Scalar> embedding_lookup(Var<Scalar> table, std::span<const int> ids) {
  const Mat<Scalar>& t = table.value();
  Mat<Scalar> v(static_cast<Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table with " +
                       std::to_string(t.rows()) + " rows");
    }
    v.row(static_cast<Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return table.graph->record(std::move(v), {table.id}, [table, idv](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    Mat<Scalar>& dst = g.grad_of(table.id);
    for (std::size_t i = 0; i < idv.size(); ++i) dst.row(idv[i]) += G.row(static_cast<Index>(i));
  });
}

template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> a, std::span<const int> rows) {
  return embedding_lookup(a, rows);
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  Mat<Scalar> v = a.value().transpose();
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    g.grad_of(a.id) += g.grad(self).transpose();
  });
}

template <typename Scalar>
Var<Scalar> log_softmax(Var<Scalar> a, int axis = 1) {
  if (axis == 0) return transpose(log_softmax(transpose(a), 1));
  if (axis != 1) throw ContractError("log_softmax: axis must be 0 or 1");
  Mat<Scalar> v = a.value().colwise() - detail::row_logsumexp(a.value()).col(0);
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    const Mat<Scalar>& out = g.value(self);
    Mat<Scalar> p = out.array().exp();
    Mat<Scalar> s = G.rowwise().sum();
    Mat<Scalar>& dst = g.grad_of(a.id);
    for (Index r = 0; r < G.rows(); ++r) dst.row(r) += G.row(r) - p.row(r) * s(r, 0);
  });
}

template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> a, int axis = 1) {
  if (axis == 0) return transpose(softmax(transpose(a), 1));
  if (axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  Mat<Scalar> lse = detail::row_logsumexp(a.value());
  Mat<Scalar> v = (a.value().colwise() - lse.col(0)).array().exp();
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    const Mat<Scalar>& s = g.value(self);
    Mat<Scalar> dot = G.cwiseProduct(s).rowwise().sum();
    Mat<Scalar>& dst = g.grad_of(a.id);
    for (Index r = 0; r < G.rows(); ++r) {
      dst.row(r) += s.row(r).cwiseProduct((G.row(r).array() - dot(r, 0)).matrix());
    }
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  Mat<Scalar> v = a.value().cwiseMax(Scalar(0));
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    g.grad_of(a.id).array() += g.grad(self).array() * (g.value(a.id).array() > Scalar(0)).template cast<Scalar>();
  });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Mat<Scalar> v = a.value().array().tanh();
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& y = g.value(self);
    g.grad_of(a.id).array() += g.grad(self).array() * (Scalar(1) - y.array().square());
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return a.graph->record(std::move(v), {a.id}, [a](Graph<Scalar>& g, int self) {
    g.grad_of(a.id).array() += g.grad(self)(0, 0);
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  const Index n = a.value().size();
  if (n == 0) throw DimensionError("mean: empty input");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(n));
}

// weights (1 x T) applied to rows (T x D) -> 1 x D.
template <typename Scalar>
Var<Scalar> weighted_sum(Var<Scalar> weights, Var<Scalar> rows) {
  detail::require_same_graph(weights, rows, "weighted_sum");
  if (weights.rows() != 1 || weights.cols() != rows.rows()) {
    throw DimensionError(detail::dims("weighted_sum", weights.shape_str(), rows.shape_str()));
  }
  return matmul(weights, rows);
}

// Single element as a 1 x 1 value.
template <typename Scalar>
Var<Scalar> pick(Var<Scalar> a, Index r, Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
    throw IndexError("pick: (" + std::to_string(r) + "," + std::to_string(c) + ") outside " +
                     a.shape_str());
  }
  Mat<Scalar> v(1, 1);
  v(0, 0) = a.value()(r, c);
  return a.graph->record(std::move(v), {a.id}, [a, r, c](Graph<Scalar>& g, int self) {
    g.grad_of(a.id)(r, c) += g.grad(self)(0, 0);
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + a.shape_str());
  }
  Mat<Scalar> v = a.value().middleRows(begin, count);
  return a.graph->record(std::move(v), {a.id}, [a, begin, count](Graph<Scalar>& g, int self) {
    g.grad_of(a.id).middleRows(begin, count) += g.grad(self);
  });
}

// Groups `k` consecutive rows into one: (T0 x F) -> (floor(T0/k) x kF).
// Trailing rows that do not fill a group are dropped.
template <typename Scalar>
Var<Scalar> stack_frames(Var<Scalar> a, Index k) {
  if (k < 1) throw ContractError("stack_frames: k must be >= 1");
  const Index out_rows = a.rows() / k;
  const Index f = a.cols();
  Mat<Scalar> v(out_rows, k * f);
  for (Index r = 0; r < out_rows; ++r) {
    for (Index j = 0; j < k; ++j) v.block(r, j * f, 1, f) = a.value().row(r * k + j);
  }
  return a.graph->record(std::move(v), {a.id}, [a, k, f, out_rows](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    Mat<Scalar>& dst = g.grad_of(a.id);
    for (Index r = 0; r < out_rows; ++r) {
      for (Index j = 0; j < k; ++j) dst.row(r * k + j) += G.block(r, j * f, 1, f);
    }
  });
}

// Pairwise sum: row (t * U + u) of the result is a[t] + b[u].
template <typename Scalar>
Var<Scalar> outer_add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_graph(a, b, "outer_add");
  if (a.cols() != b.cols()) throw DimensionError(detail::dims("outer_add", a.shape_str(), b.shape_str()));
  const Index T = a.rows(), U = b.rows();
  Mat<Scalar> v(T * U, a.cols());
  for (Index t = 0; t < T; ++t) {
    v.middleRows(t * U, U) = b.value().rowwise() + a.value().row(t);
  }
  return a.graph->record(std::move(v), {a.id, b.id}, [a, b, T, U](Graph<Scalar>& g, int self) {
    const Mat<Scalar>& G = g.grad(self);
    const bool ga = g.needs_grad(a.id), gb = g.needs_grad(b.id);
    for (Index t = 0; t < T; ++t) {
      auto block = G.middleRows(t * U, U);
      if (ga) g.grad_of(a.id).row(t) += block.colwise().sum();
      if (gb) g.grad_of(b.id) += block;
    }
  });
}

// Per-row normalization with learned gain and bias (both 1 x D).
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gain, Var<Scalar> bias, Scalar eps = Scalar(1e-5)) {
  const Index D = x.cols();
  if (gain.rows() != 1 || gain.cols() != D || bias.rows() != 1 || bias.cols() != D) {
    throw DimensionError(detail::dims("layer_norm", x.shape_str(), gain.shape_str()));
  }
  const Mat<Scalar>& xv = x.value();
  Mat<Scalar> xhat(xv.rows(), D);
  Mat<Scalar> inv_std(xv.rows(), 1);
  for (Index r = 0; r < xv.rows(); ++r) {
    const Scalar mu = xv.row(r).mean();
    const Scalar var = (xv.row(r).array() - mu).square().mean();
    inv_std(r, 0) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r, 0);
  }
  Mat<Scalar> v = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return x.graph->record(
      std::move(v), {x.id, gain.id, bias.id},
      [x, gain, bias, xhat, inv_std](Graph<Scalar>& g, int self) {
        const Mat<Scalar>& G = g.grad(self);
        if (g.needs_grad(gain.id)) g.grad_of(gain.id) += G.cwiseProduct(xhat).colwise().sum();
        if (g.needs_grad(bias.id)) g.grad_of(bias.id) += G.colwise().sum();
        if (!g.needs_grad(x.id)) return;
        Mat<Scalar>& dst = g.grad_of(x.id);
        const auto gv = g.value(gain.id).row(0).array();
        for (Index r = 0; r < G.rows(); ++r) {
          const auto dxhat = (G.row(r).array() * gv).eval();
          const Scalar m1 = dxhat.mean();
          const Scalar m2 = (dxhat * xhat.row(r).array()).mean();
          dst.row(r).array() += inv_std(r, 0) * (dxhat - m1 - xhat.row(r).array() * m2);
        }
      });
}

}  // namespace tk
