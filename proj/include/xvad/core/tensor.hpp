#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "xvad/core/shape.hpp"

namespace xvad {

/// Dense tensor with a shared underlying buffer.
///
/// Copies are shallow (torch-style handles); use clone() for an independent
/// buffer. Buffers referenced from an autodiff graph are treated as immutable
/// until the graph is dropped.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(const Shape& s, T fill = T(0))
      : shape_(s), data_(std::make_shared<std::vector<T>>(static_cast<std::size_t>(s.numel()), fill)) {}

  static Tensor zeros(const Shape& s) { return Tensor(s, T(0)); }
  static Tensor ones(const Shape& s) { return Tensor(s, T(1)); }
  static Tensor full(const Shape& s, T v) { return Tensor(s, v); }

  static Tensor from_vector(const Shape& s, std::vector<T> values) {
    require(static_cast<Index>(values.size()) == s.numel(), "from_vector: ", values.size(),
            " values for shape ", s.str());
    Tensor t;
    t.shape_ = s;
    t.data_ = std::make_shared<std::vector<T>>(std::move(values));
    return t;
  }

  static Tensor scalar(T v) { return full(Shape::scalar(), v); }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  Index numel() const { return shape_.numel(); }

  T* data() { return data_->data(); }
  const T* data() const { return data_->data(); }

  T& operator[](Index i) { return (*data_)[static_cast<std::size_t>(i)]; }
  const T& operator[](Index i) const { return (*data_)[static_cast<std::size_t>(i)]; }

  T& at(Index n, Index c, Index h, Index w) {
    return (*this)[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(Index n, Index c, Index h, Index w) const {
    return (*this)[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  T& at(Index c, Index h, Index w) { return (*this)[(c * shape_[1] + h) * shape_[2] + w]; }
  const T& at(Index c, Index h, Index w) const {
    return (*this)[(c * shape_[1] + h) * shape_[2] + w];
  }
  T& at(Index r, Index c) { return (*this)[r * shape_[1] + c]; }
  const T& at(Index r, Index c) const { return (*this)[r * shape_[1] + c]; }

  /// Scalar value of a 1-element tensor.
  T item() const {
    require(numel() == 1, "item() on tensor of shape ", shape_.str());
    return (*data_)[0];
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  /// Same buffer viewed under a different shape with equal element count.
  Tensor reshaped(const Shape& s) const {
    require(s.numel() == numel(), "reshape ", shape_.str(), " -> ", s.str());
    Tensor t = *this;
    t.shape_ = s;
    return t;
  }

  void fill(T v) { std::fill(data_->begin(), data_->end(), v); }

  template <typename F>
  Tensor<T> map(F&& f) const {
    Tensor<T> out(shape_);
    const T* a = data();
    T* o = out.data();
    const Index n = numel();
    for (Index i = 0; i < n; ++i) o[i] = f(a[i]);
    return out;
  }

  void add_(const Tensor<T>& o) {
    require(o.shape_ == shape_, "add_: shape ", o.shape_.str(), " vs ", shape_.str());
    T* a = data();
    const T* b = o.data();
    const Index n = numel();
    for (Index i = 0; i < n; ++i) a[i] += b[i];
  }

  bool all_finite() const {
    const T* a = data();
    const Index n = numel();
    for (Index i = 0; i < n; ++i)
      if (!std::isfinite(static_cast<double>(a[i]))) return false;
    return true;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

}  // namespace xvad
