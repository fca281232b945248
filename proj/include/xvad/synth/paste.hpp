#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "xvad/core/random.hpp"
#include "xvad/data/frame.hpp"
#include "xvad/synth/extractor.hpp"
#include "xvad/synth/scda.hpp"

namespace xvad {

/// Random paste rectangle. Coordinates are pixel bounds after clipping:
/// 0 <= b1 < b2 <= W and 0 <= b3 < b4 <= H.
struct PasteBox {
  Index b1 = 0, b2 = 0, b3 = 0, b4 = 0;
  double bx = 0, by = 0, bw = 0, bh = 0, beta = 0;

  Index width() const { return b2 - b1; }
  Index height() const { return b4 - b3; }
};

/// Deterministic part of the box sampler: bw = W*sqrt(1-beta),
/// bh = H*sqrt(1-beta), centre (bx, by), bounds clipped to the frame.
inline PasteBox paste_box_from_draws(Index H, Index W, double bx, double by, double beta) {
  PasteBox box;
  box.bx = bx;
  box.by = by;
  box.beta = beta;
  box.bw = W * std::sqrt(1.0 - beta);
  box.bh = H * std::sqrt(1.0 - beta);
  auto clip = [](double v, double hi) { return v < 0.0 ? 0.0 : (v > hi ? hi : v); };
  box.b1 = static_cast<Index>(std::llround(clip(bx - box.bw / 2.0, static_cast<double>(W))));
  box.b2 = static_cast<Index>(std::llround(clip(bx + box.bw / 2.0, static_cast<double>(W))));
  box.b3 = static_cast<Index>(std::llround(clip(by - box.bh / 2.0, static_cast<double>(H))));
  box.b4 = static_cast<Index>(std::llround(clip(by + box.bh / 2.0, static_cast<double>(H))));
  return box;
}

/// Draws (bx, by, beta) uniformly and resamples degenerate boxes (bounded);
/// after `max_retries` failed draws the full frame is used.
inline PasteBox sample_paste_box(Index H, Index W, Rng& rng, int max_retries = 16) {
  require(H > 0 && W > 0, "sample_paste_box: empty frame");
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const double bx = rng.uniform(0.0, static_cast<double>(W));
    const double by = rng.uniform(0.0, static_cast<double>(H));
    const double beta = rng.uniform();
    const PasteBox box = paste_box_from_draws(H, W, bx, by, beta);
    if (box.width() >= 1 && box.height() >= 1) return box;
  }
  return paste_box_from_draws(H, W, W / 2.0, H / 2.0, 0.0);
}

/// Pseudo-abnormal frame with its ground-truth mask and provenance.
struct PseudoAnomaly {
  Tensor<float> frame;  // 3 x H x W in [-1, 1]
  Tensor<float> mask;   // H x W in {0, 1}
  bool empty_paste = false;

  std::string base_id, donor_id;
  Index base_index = 0, donor_index = 0;
  PasteBox box;
  std::uint64_t seed = 0;
};

/// Foreground mask of a donor frame at full resolution: extractor features ->
/// SCDA attention -> binarize -> nearest resize to H x W. Depends only on
/// (donor, extractor, threshold), so callers may cache it per donor frame.
template <typename T>
Tensor<float> locate_foreground(const Tensor<float>& donor_pixels,
                                const FrozenFeatureExtractor<T>& extractor, float threshold) {
  const Tensor<float> features = extractor.features(donor_pixels);
  const Tensor<float> attention = scda_attention(features);
  const Tensor<float> mask = binarize(attention, threshold);
  return resize_nearest(mask, donor_pixels.shape()[1], donor_pixels.shape()[2]);
}

/// Pastes the masked donor content, squeezed to the box extent, onto the base
/// frame. The mask resizes nearest (stays binary), the donor bilinear.
inline PseudoAnomaly paste_object(const Frame& base, const Frame& donor,
                                  const Tensor<float>& donor_mask_fullres, const PasteBox& box) {
  const Index H = base.pixels.shape()[1], W = base.pixels.shape()[2];
  require(donor_mask_fullres.shape() == Shape{donor.pixels.shape()[1], donor.pixels.shape()[2]},
          "paste_object: mask/donor size mismatch");
  PseudoAnomaly out;
  out.frame = base.pixels.clone();
  out.mask = Tensor<float>::zeros(Shape{H, W});
  out.base_id = base.source_id;
  out.base_index = base.index;
  out.donor_id = donor.source_id;
  out.donor_index = donor.index;
  out.box = box;

  const Index bw = box.width(), bh = box.height();
  Tensor<float> mask_box = resize_nearest(donor_mask_fullres, bh, bw);
  Tensor<float> masked_donor = donor.pixels.clone();
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < donor_mask_fullres.numel(); ++i)
      if (donor_mask_fullres[i] == 0.0f) masked_donor[c * donor_mask_fullres.numel() + i] = 0.0f;
  Tensor<float> donor_box = resize_bilinear(masked_donor, bh, bw);

  bool any = false;
  for (Index y = 0; y < bh; ++y)
    for (Index x = 0; x < bw; ++x) {
      if (mask_box[y * bw + x] != 1.0f) continue;
      any = true;
      const Index ty = box.b3 + y, tx = box.b1 + x;
      out.mask[ty * W + tx] = 1.0f;
      for (Index c = 0; c < 3; ++c)
        out.frame[(c * H + ty) * W + tx] = donor_box[(c * bh + y) * bw + x];
    }
  out.empty_paste = !any;
  return out;
}

/// Full pipeline of the anomaly synthesis module: localize the donor's
/// foreground with the frozen CNN, then paste it at a random box on the base
/// frame. Pure given the rng state.
template <typename T>
PseudoAnomaly synthesize(const Frame& base, const Frame& donor,
                         const FrozenFeatureExtractor<T>& extractor, float threshold, Rng& rng,
                         std::uint64_t provenance_seed = 0) {
  const Tensor<float> mask = locate_foreground(donor.pixels, extractor, threshold);
  const PasteBox box =
      sample_paste_box(base.pixels.shape()[1], base.pixels.shape()[2], rng);
  PseudoAnomaly out = paste_object(base, donor, mask, box);
  out.seed = provenance_seed;
  return out;
}

}  // namespace xvad
