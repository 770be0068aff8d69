#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "tk/tensor.hpp"

namespace tk {

// Named, trainable parameters. std::map keeps addresses stable and gives a
// deterministic (lexicographic) iteration order for optimizers and archives.
template <typename Scalar>
class ParameterStore {
 public:
  Tensor<Scalar>& add(const std::string& name, Shape shape) {
    auto [it, inserted] = params_.try_emplace(name, std::move(shape), true);
    if (!inserted) throw ContractError("parameter '" + name + "' registered twice");
    return it->second;
  }

  // Uniform(-a, a) with a = scale / sqrt(fan_in).
  Tensor<Scalar>& add_uniform(const std::string& name, Shape shape, Index fan_in, std::mt19937_64& rng,
                              Scalar scale = Scalar(1)) {
    Tensor<Scalar>& t = add(name, std::move(shape));
    const Scalar a = scale / std::sqrt(static_cast<Scalar>(std::max<Index>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(a * dist(rng));
    return t;
  }

  Tensor<Scalar>& add_constant(const std::string& name, Shape shape, Scalar value) {
    Tensor<Scalar>& t = add(name, std::move(shape));
    t.values().setConstant(value);
    return t;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor<Scalar>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor<Scalar>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<Tensor<Scalar>*> all() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& [_, t] : params_) out.push_back(&t);
    return out;
  }

  const std::map<std::string, Tensor<Scalar>>& entries() const { return params_; }
  std::map<std::string, Tensor<Scalar>>& entries() { return params_; }

  Index element_count() const {
    Index n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  void zero_grads() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

 private:
  std::map<std::string, Tensor<Scalar>> params_;
};

}  // namespace tk
