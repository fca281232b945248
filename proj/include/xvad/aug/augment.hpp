#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "xvad/core/random.hpp"
#include "xvad/core/tensor.hpp"

namespace xvad {

/// Parameters of the normal-frame augmentation g(.): color jitter, random
/// affine (rotation), random perspective, applied sequentially.
struct AugmentConfig {
  double brightness = 0.1;
  double contrast = 0.1;
  double saturation = 0.1;
  double hue = 0.1;
  double affine_degrees = 360.0;       // rotation drawn from +-degrees/2
  double perspective_distortion = 0.2;
  double p = 1.0;                      // per-op apply probability
};

namespace detail {

inline void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r) h = std::fmod((g - b) / d + 6.0, 6.0) / 6.0;
  else if (mx == g) h = ((b - r) / d + 2.0) / 6.0;
  else h = ((r - g) / d + 4.0) / 6.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = std::fmod(h, 1.0) * 6.0;
  const int i = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

/// Bilinear lookup with constant fill outside the frame.
inline double sample_bilinear(const Tensor<float>& img, Index c, double y, double x, double fill) {
  const Index H = img.shape()[1], W = img.shape()[2];
  const Index x0 = static_cast<Index>(std::floor(x)), y0 = static_cast<Index>(std::floor(y));
  const double wx = x - x0, wy = y - y0;
  auto px = [&](Index yy, Index xx) -> double {
    if (yy < 0 || yy >= H || xx < 0 || xx >= W) return fill;
    return img[(c * H + yy) * W + xx];
  };
  return (1.0 - wy) * ((1.0 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
         wy * ((1.0 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
}

}  // namespace detail

/// g(.) from the relative attention loss: jitter -> rotation -> perspective.
/// Shape-preserving; output clamped to [-1, 1]; out-of-frame pixels fill with
/// -1. Zero magnitudes reproduce the input exactly.
inline Tensor<float> augment(const Tensor<float>& frame, const AugmentConfig& cfg, Rng& rng) {
  require(frame.shape().rank() == 3 && frame.shape()[0] == 3, "augment expects 3xHxW, got ",
          frame.shape().str());
  const Index H = frame.shape()[1], W = frame.shape()[2], HW = H * W;
  Tensor<float> img = frame.clone();
  auto gate = [&]() { return cfg.p >= 1.0 || rng.uniform() < cfg.p; };

  // --- Color jitter (multiplicative b/c/s factors, additive hue shift) ---
  if ((cfg.brightness > 0 || cfg.contrast > 0 || cfg.saturation > 0 || cfg.hue > 0) && gate()) {
    // Work in [0, 1].
    for (Index i = 0; i < img.numel(); ++i) img[i] = (img[i] + 1.0f) / 2.0f;
    auto clamp01 = [&img]() {
      for (Index i = 0; i < img.numel(); ++i)
        img[i] = img[i] < 0.0f ? 0.0f : (img[i] > 1.0f ? 1.0f : img[i]);
    };
    auto gray_at = [&](Index i) {
      return 0.299f * img[i] + 0.587f * img[HW + i] + 0.114f * img[2 * HW + i];
    };
    if (cfg.brightness > 0) {
      const float f = static_cast<float>(rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness));
      for (Index i = 0; i < img.numel(); ++i) img[i] *= f;
      clamp01();
    }
    if (cfg.contrast > 0) {
      const float f = static_cast<float>(rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast));
      float mean = 0.0f;
      for (Index i = 0; i < HW; ++i) mean += gray_at(i);
      mean /= static_cast<float>(HW);
      for (Index i = 0; i < img.numel(); ++i) img[i] = img[i] * f + mean * (1.0f - f);
      clamp01();
    }
    if (cfg.saturation > 0) {
      const float f = static_cast<float>(rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation));
      for (Index i = 0; i < HW; ++i) {
        const float gray = gray_at(i);
        for (Index c = 0; c < 3; ++c)
          img[c * HW + i] = img[c * HW + i] * f + gray * (1.0f - f);
      }
      clamp01();
    }
    if (cfg.hue > 0) {
      const double shift = rng.uniform(-cfg.hue, cfg.hue);
      for (Index i = 0; i < HW; ++i) {
        double h, s, v, r, g, b;
        detail::rgb_to_hsv(img[i], img[HW + i], img[2 * HW + i], h, s, v);
        detail::hsv_to_rgb(std::fmod(h + shift + 1.0, 1.0), s, v, r, g, b);
        img[i] = static_cast<float>(r);
        img[HW + i] = static_cast<float>(g);
        img[2 * HW + i] = static_cast<float>(b);
      }
    }
    for (Index i = 0; i < img.numel(); ++i) img[i] = img[i] * 2.0f - 1.0f;
  }

  // --- Random rotation about the image centre ---
  if (cfg.affine_degrees > 0 && gate()) {
    const double half = std::min(cfg.affine_degrees / 2.0, 180.0);
    const double theta = rng.uniform(-half, half) * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
    Tensor<float> out(img.shape());
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const double sx = ct * (x - cx) + st * (y - cy) + cx;
        const double sy = -st * (x - cx) + ct * (y - cy) + cy;
        for (Index c = 0; c < 3; ++c)
          out[(c * H + y) * W + x] =
              static_cast<float>(detail::sample_bilinear(img, c, sy, sx, -1.0));
      }
    img = out;
  }

  // --- Random perspective (corners pulled inward by up to scale * half) ---
  if (cfg.perspective_distortion > 0 && gate()) {
    const double dx = cfg.perspective_distortion * (W / 2.0);
    const double dy = cfg.perspective_distortion * (H / 2.0);
    const double corners[4][2] = {
        {0, 0}, {static_cast<double>(W - 1), 0},
        {static_cast<double>(W - 1), static_cast<double>(H - 1)}, {0, static_cast<double>(H - 1)}};
    double moved[4][2];
    for (int k = 0; k < 4; ++k) {
      const double ox = rng.uniform(0.0, dx), oy = rng.uniform(0.0, dy);
      moved[k][0] = corners[k][0] + (k == 0 || k == 3 ? ox : -ox);
      moved[k][1] = corners[k][1] + (k == 0 || k == 1 ? oy : -oy);
    }
    // Homography Q with Q(moved_k) = corner_k; output(p) = input(Q(p)).
    Eigen::Matrix<double, 8, 8> A = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> rhs;
    for (int k = 0; k < 4; ++k) {
      const double X = moved[k][0], Y = moved[k][1];
      const double u = corners[k][0], v = corners[k][1];
      A.row(2 * k) << X, Y, 1, 0, 0, 0, -u * X, -u * Y;
      A.row(2 * k + 1) << 0, 0, 0, X, Y, 1, -v * X, -v * Y;
      rhs(2 * k) = u;
      rhs(2 * k + 1) = v;
    }
    const Eigen::Matrix<double, 8, 1> q = A.fullPivLu().solve(rhs);
    Tensor<float> out(img.shape());
    for (Index y = 0; y < H; ++y)
      for (Index x = 0; x < W; ++x) {
        const double w = q(6) * x + q(7) * y + 1.0;
        const double sx = (q(0) * x + q(1) * y + q(2)) / w;
        const double sy = (q(3) * x + q(4) * y + q(5)) / w;
        for (Index c = 0; c < 3; ++c)
          out[(c * H + y) * W + x] =
              static_cast<float>(detail::sample_bilinear(img, c, sy, sx, -1.0));
      }
    img = out;
  }

  for (Index i = 0; i < img.numel(); ++i)
    img[i] = img[i] < -1.0f ? -1.0f : (img[i] > 1.0f ? 1.0f : img[i]);
  return img;
}

}  // namespace xvad
