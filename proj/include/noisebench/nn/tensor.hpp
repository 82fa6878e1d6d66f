#pragma once

#include <Eigen/Core>
#include <numeric>
#include <string>
#include <vector>

#include "noisebench/error.hpp"

namespace noisebench::nn {

template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense n-d value block, row-major logical layout over a flat Eigen array.
// Layers view slices of it through Eigen maps.
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    Eigen::Index n = 1;
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("tensor dimension must be positive");
      n *= d;
    }
    values_.setZero(n);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  Eigen::Index size() const { return values_.size(); }

  S* data() { return values_.data(); }
  const S* data() const { return values_.data(); }
  ArrX<S>& flat() { return values_; }
  const ArrX<S>& flat() const { return values_; }

  S& operator[](Eigen::Index i) { return values_[i]; }
  S operator[](Eigen::Index i) const { return values_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    out.flat() = values_.template cast<T>();
    return out;
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  ArrX<S> values_;
};

}  // namespace noisebench::nn
