#pragma once

#include "xvad/core/tensor.hpp"

namespace xvad {

/// Channel-wise summation of a d x h x w feature stack followed by min-max
/// normalization to [0, 1]. A constant sum map comes out all-zero.
template <typename T>
Tensor<T> scda_attention(const Tensor<T>& features) {
  require(features.shape().rank() == 3 && features.shape()[0] >= 1,
          "scda_attention expects d x h x w features, got ", features.shape().str());
  require<NumericError>(features.all_finite(), "scda_attention: non-finite features");
  const Index d = features.shape()[0], h = features.shape()[1], w = features.shape()[2];
  Tensor<T> a(Shape{h, w});
  for (Index c = 0; c < d; ++c)
    for (Index i = 0; i < h * w; ++i) a[i] += features[c * h * w + i];
  T lo = a[0], hi = a[0];
  for (Index i = 1; i < h * w; ++i) {
    lo = std::min(lo, a[i]);
    hi = std::max(hi, a[i]);
  }
  if (hi - lo <= T(0)) return Tensor<T>::zeros(Shape{h, w});
  for (Index i = 0; i < h * w; ++i) a[i] = (a[i] - lo) / (hi - lo);
  return a;
}

/// M(i,j) = 1 iff A(i,j) > threshold.
template <typename T>
Tensor<T> binarize(const Tensor<T>& attention, T threshold) {
  return attention.map([threshold](T v) { return v > threshold ? T(1) : T(0); });
}

}  // namespace xvad
