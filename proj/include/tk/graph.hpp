#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tk/tensor.hpp"

namespace tk {

template <typename Scalar>
class Graph;

// Handle to a value recorded on a Graph.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const Mat<Scalar>& value() const { return graph->value(id); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar item() const { return value()(0, 0); }
  std::string shape_str() const {
    return "[" + std::to_string(rows()) + "," + std::to_string(cols()) + "]";
  }
};

// Tape of primitive operations. Nodes are appended in execution order, so the
// tape is topologically sorted and backward walks it in exact reverse order.
template <typename Scalar>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf holding a copy of `m`; never receives gradient.
  Var<Scalar> constant(Mat<Scalar> m) {
    Node n;
    n.own = std::move(m);
    return push(std::move(n));
  }

  // Leaf bound to a parameter tensor. The value is referenced, not copied, so
  // the tensor must outlive the graph.
  Var<Scalar> param(Tensor<Scalar>& t) {
    Node n;
    n.external = &t.values();
    n.leaf = &t;
    n.needs_grad = t.requires_grad();
    return push(std::move(n));
  }

  // Read-only binding: referenced value, no gradient.
  Var<Scalar> param(const Tensor<Scalar>& t) {
    Node n;
    n.external = &t.values();
    return push(std::move(n));
  }

  // Appends a derived node. `backward` receives the graph and the node id and
  // must accumulate into the inputs through `grad_of`.
  Var<Scalar> record(Mat<Scalar> value, std::vector<int> inputs, BackwardFn backward) {
    Node n;
    n.own = std::move(value);
    for (int in : inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
    n.inputs = std::move(inputs);
    if (n.needs_grad) n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Mat<Scalar>& value(int id) const { return nodes_[id].value(); }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // Gradient buffer of node `id`, allocated as zeros on first use.
  Mat<Scalar>& grad_of(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat<Scalar>::Zero(n.value().rows(), n.value().cols());
    return n.grad;
  }

  const Mat<Scalar>& grad(int id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar loss. With `accumulate_into_leaves`
  // the leaf gradients are added to the bound tensors immediately; otherwise
  // they stay on the graph until flush_leaf_grads() is called.
  void backward(Var<Scalar> loss, bool accumulate_into_leaves = true) {
    if (loss.graph != this) throw ContractError("backward: loss belongs to a different graph");
    const Mat<Scalar>& lv = value(loss.id);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + loss.shape_str());
    }
    grad_of(loss.id).setConstant(Scalar(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backward && n.grad.size() != 0) n.backward(*this, i);
    }
    if (accumulate_into_leaves) flush_leaf_grads();
  }

  void flush_leaf_grads() {
    for (Node& n : nodes_) {
      if (n.leaf == nullptr || !n.leaf->requires_grad()) continue;
      if (n.grad.size() != 0) {
        n.leaf->accumulate_grad(n.grad);
      } else if (!n.leaf->has_grad()) {
        n.leaf->zero_grad();
      }
    }
  }

 private:
  struct Node {
    Mat<Scalar> own;
    const Mat<Scalar>* external = nullptr;
    Mat<Scalar> grad;
    std::vector<int> inputs;
    BackwardFn backward;
    Tensor<Scalar>* leaf = nullptr;
    bool needs_grad = false;

    const Mat<Scalar>& value() const { return external ? *external : own; }
  };

  Var<Scalar> push(Node n) {
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace tk
