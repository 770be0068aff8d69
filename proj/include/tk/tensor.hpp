#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tk/errors.hpp"

namespace tk {

using Index = Eigen::Index;

// Row-major dense matrix; every graph value is one of these.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense real array with an optional gradient slot.
//
// Storage is a row-major matrix: rank-0 and rank-1 tensors live in a single
// row, rank >= 2 tensors use shape[0] rows and the product of the remaining
// dimensions as columns. Flat iteration order is therefore row-major for all
// ranks.
template <typename Scalar>
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    values_ = Mat<Scalar>::Zero(storage_rows(shape_), storage_cols(shape_));
  }

  Tensor(const Mat<Scalar>& m, bool requires_grad = false)
      : shape_{m.rows(), m.cols()}, values_(m), requires_grad_(requires_grad) {}

  static Tensor from_values(Shape shape, const std::vector<Scalar>& flat,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<Index>(flat.size()) != t.size()) {
      throw DimensionError("tensor of shape " + shape_str(t.shape()) + " needs " +
                           std::to_string(t.size()) + " values, got " +
                           std::to_string(flat.size()));
    }
    std::copy(flat.begin(), flat.end(), t.values_.data());
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return values_.size(); }
  Index rank() const { return static_cast<Index>(shape_.size()); }

  Mat<Scalar>& values() { return values_; }
  const Mat<Scalar>& values() const { return values_; }

  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return grad_.size() == values_.size() && values_.size() > 0; }
  Mat<Scalar>& grad() { return grad_; }
  const Mat<Scalar>& grad() const { return grad_; }

  // Allocates (or clears) the gradient slot.
  void zero_grad() { grad_ = Mat<Scalar>::Zero(values_.rows(), values_.cols()); }
  void drop_grad() { grad_.resize(0, 0); }

  void accumulate_grad(const Mat<Scalar>& g) {
    if (!has_grad()) zero_grad();
    grad_ += g;
  }

 private:
  static Index storage_rows(const Shape& s) { return s.size() < 2 ? 1 : s[0]; }
  static Index storage_cols(const Shape& s) {
    if (s.empty()) return 1;
    if (s.size() == 1) return s[0];
    return shape_numel(s) / std::max<Index>(s[0], 1);
  }

  Shape shape_;
  Mat<Scalar> values_;
  Mat<Scalar> grad_;
  bool requires_grad_ = false;
};

}  // namespace tk
