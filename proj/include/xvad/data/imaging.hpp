#pragma once

#include <algorithm>
#include <cmath>

#include "xvad/core/tensor.hpp"

namespace xvad {

/// Bilinear resampling of a CHW tensor with half-pixel centers (the common
/// align_corners=false convention), edge-clamped.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, Index out_h, Index out_w) {
  require(src.shape().rank() == 3, "resize_bilinear expects CHW, got ", src.shape().str());
  require(out_h >= 1 && out_w >= 1, "resize_bilinear: empty target");
  const Index C = src.shape()[0], H = src.shape()[1], W = src.shape()[2];
  if (out_h == H && out_w == W) return src.clone();
  Tensor<T> dst(Shape{C, out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (Index oy = 0; oy < out_h; ++oy) {
    const double fy = (oy + 0.5) * sy - 0.5;
    const Index y0 = static_cast<Index>(std::floor(fy));
    const double wy = fy - y0;
    const Index ya = std::clamp<Index>(y0, 0, H - 1), yb = std::clamp<Index>(y0 + 1, 0, H - 1);
    for (Index ox = 0; ox < out_w; ++ox) {
      const double fx = (ox + 0.5) * sx - 0.5;
      const Index x0 = static_cast<Index>(std::floor(fx));
      const double wx = fx - x0;
      const Index xa = std::clamp<Index>(x0, 0, W - 1), xb = std::clamp<Index>(x0 + 1, 0, W - 1);
      for (Index c = 0; c < C; ++c) {
        const T* p = src.data() + c * H * W;
        const double v = (1.0 - wy) * ((1.0 - wx) * p[ya * W + xa] + wx * p[ya * W + xb]) +
                         wy * ((1.0 - wx) * p[yb * W + xa] + wx * p[yb * W + xb]);
        dst[(c * out_h + oy) * out_w + ox] = static_cast<T>(v);
      }
    }
  }
  return dst;
}

/// Nearest-neighbor resampling with half-pixel centers; keeps binary data
/// binary.
template <typename T>
Tensor<T> resize_nearest(const Tensor<T>& src, Index out_h, Index out_w) {
  require(src.shape().rank() == 3 || src.shape().rank() == 2, "resize_nearest expects CHW or HW");
  const bool planar = src.shape().rank() == 3;
  const Index C = planar ? src.shape()[0] : 1;
  const Index H = planar ? src.shape()[1] : src.shape()[0];
  const Index W = planar ? src.shape()[2] : src.shape()[1];
  Tensor<T> dst(planar ? Shape{C, out_h, out_w} : Shape{out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (Index oy = 0; oy < out_h; ++oy) {
    const Index iy = std::clamp<Index>(static_cast<Index>((oy + 0.5) * sy), 0, H - 1);
    for (Index ox = 0; ox < out_w; ++ox) {
      const Index ix = std::clamp<Index>(static_cast<Index>((ox + 0.5) * sx), 0, W - 1);
      for (Index c = 0; c < C; ++c)
        dst[(c * out_h + oy) * out_w + ox] = src[(c * H + iy) * W + ix];
    }
  }
  return dst;
}

}  // namespace xvad
