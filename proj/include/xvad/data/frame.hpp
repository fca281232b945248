#pragma once

#include <string>

#include "xvad/data/image_io.hpp"
#include "xvad/data/imaging.hpp"

namespace xvad {

/// One video frame: CHW pixels in [-1, 1] plus its origin.
struct Frame {
  Tensor<float> pixels;   // 3 x H x W, values in [-1, 1]
  std::string source_id;  // video identifier
  Index index = 0;        // 0-based position within the video
};

/// Decodes an image and resizes it to size x size (bilinear); output stays in
/// raw [0, 255] units.
inline Tensor<float> load_and_resize(const std::filesystem::path& path, Index size) {
  Tensor<float> raw = read_image(path);
  return resize_bilinear(raw, size, size);
}

/// Maps raw [0, 255] values to [-1, 1] via 2*x/255 - 1.
template <typename T>
Tensor<T> normalize_frame(const Tensor<T>& raw) {
  const Index n = raw.numel();
  for (Index i = 0; i < n; ++i)
    require(raw[i] >= T(0) && raw[i] <= T(255), "normalize_frame: value ", raw[i],
            " outside [0,255]");
  return raw.map([](T v) { return T(2) * v / T(255) - T(1); });
}

/// Inverse of normalize_frame.
template <typename T>
Tensor<T> denormalize_frame(const Tensor<T>& frame) {
  return frame.map([](T v) { return (v + T(1)) * T(255) / T(2); });
}

/// [-1, 1] -> [0, 1] remap used before SSIM / PSNR.
template <typename T>
Tensor<T> to_unit_range(const Tensor<T>& frame) {
  return frame.map([](T v) { return (v + T(1)) / T(2); });
}

}  // namespace xvad
