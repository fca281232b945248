#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "xvad/core/tensor.hpp"

namespace xvad {

/// Reads an image file into a CHW float tensor with values in [0, 255].
/// Grayscale and alpha variants are expanded/flattened to 3-channel RGB.
inline Tensor<float> read_image(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError(detail::concat("cannot decode image '", path.string(), "': ", image.message));
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(detail::concat("cannot decode image '", path.string(), "': ", image.message));
  }
  const Index H = image.height, W = image.width;
  Tensor<float> out(Shape::nchw(1, 3, H, W));
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < H * W; ++i)
      out[c * H * W + i] = static_cast<float>(buffer[static_cast<std::size_t>(i * 3 + c)]);
  return out.reshaped(Shape{3, H, W});
}

/// Writes a CHW tensor with values in [0, 255] as an 8-bit RGB PNG.
inline void write_image(const std::filesystem::path& path, const Tensor<float>& chw) {
  require(chw.shape().rank() == 3 && chw.shape()[0] == 3, "write_image expects 3xHxW, got ",
          chw.shape().str());
  const Index H = chw.shape()[1], W = chw.shape()[2];
  std::vector<png_byte> buffer(static_cast<std::size_t>(3 * H * W));
  for (Index i = 0; i < H * W; ++i)
    for (Index c = 0; c < 3; ++c) {
      float v = chw[c * H * W + i];
      v = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
      buffer[static_cast<std::size_t>(i * 3 + c)] = static_cast<png_byte>(v + 0.5f);
    }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(W);
  image.height = static_cast<png_uint_32>(H);
  image.format = PNG_FORMAT_RGB;
  std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr))
    throw IoError(detail::concat("cannot write image '", path.string(), "': ", image.message));
}

}  // namespace xvad
