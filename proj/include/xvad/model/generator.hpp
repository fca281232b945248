#pragma once

#include <string>
#include <vector>

#include "xvad/model/memory.hpp"
#include "xvad/nn/layers.hpp"

namespace xvad {

/// Channel concatenation for skip connections.
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  require(a.shape().rank() == 4 && b.shape().rank() == 4 && a.shape()[0] == b.shape()[0] &&
              a.shape()[2] == b.shape()[2] && a.shape()[3] == b.shape()[3],
          "concat_channels: ", a.shape().str(), " vs ", b.shape().str());
  const Index N = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1];
  const Index HW = a.shape()[2] * a.shape()[3];
  Tensor<T> y(Shape::nchw(N, Ca + Cb, a.shape()[2], a.shape()[3]));
  for (Index n = 0; n < N; ++n) {
    for (Index c = 0; c < Ca; ++c)
      for (Index i = 0; i < HW; ++i)
        y[(n * (Ca + Cb) + c) * HW + i] = a.value()[(n * Ca + c) * HW + i];
    for (Index c = 0; c < Cb; ++c)
      for (Index i = 0; i < HW; ++i)
        y[(n * (Ca + Cb) + Ca + c) * HW + i] = b.value()[(n * Cb + c) * HW + i];
  }
  return Var<T>::make_op(y, {a, b}, [a, b, N, Ca, Cb, HW](const Tensor<T>& g) {
    if (a.requires_grad()) {
      Tensor<T> ga(a.shape());
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < Ca; ++c)
          for (Index i = 0; i < HW; ++i)
            ga[(n * Ca + c) * HW + i] = g[(n * (Ca + Cb) + c) * HW + i];
      a.accum_grad(ga);
    }
    if (b.requires_grad()) {
      Tensor<T> gb(b.shape());
      for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < Cb; ++c)
          for (Index i = 0; i < HW; ++i)
            gb[(n * Cb + c) * HW + i] = g[(n * (Ca + Cb) + Ca + c) * HW + i];
      b.accum_grad(gb);
    }
  });
}

/// Memory-augmented encoder-decoder with lateral skip connections.
/// `widths` lists the channel count per scale; the last entry is the
/// bottleneck width Q where the memory bank sits. Output is squashed with
/// tanh into the [-1, 1] frame range.
struct GeneratorConfig {
  Index input_frames = 4;  // T
  Index channels = 3;
  std::vector<Index> widths = {64, 128, 256, 512};
  Index memory_items = 2000;  // K
  double memory_lambda = 0.0005;
  bool memory_per_location = true;  // false: one pooled query per sample
};

template <typename T>
class Generator {
 public:
  Generator() = default;

  Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    require<ConfigError>(cfg.widths.size() >= 2, "generator needs at least two scale widths");
    const Index in_ch = cfg.input_frames * cfg.channels;
    enc_a_.emplace_back(in_ch, cfg.widths[0], 3, 1, 1, rng);
    enc_b_.emplace_back(cfg.widths[0], cfg.widths[0], 3, 1, 1, rng);
    for (std::size_t i = 1; i < cfg.widths.size(); ++i) {
      enc_a_.emplace_back(cfg.widths[i - 1], cfg.widths[i], 3, 2, 1, rng);
      enc_b_.emplace_back(cfg.widths[i], cfg.widths[i], 3, 1, 1, rng);
    }
    memory_ = MemoryBank<T>(cfg.memory_items, cfg.widths.back(), rng,
                            static_cast<T>(cfg.memory_lambda));
    for (std::size_t i = cfg.widths.size() - 1; i >= 1; --i) {
      dec_up_.emplace_back(cfg.widths[i], cfg.widths[i - 1], 3, 1, 1, rng);
      dec_fuse_.emplace_back(2 * cfg.widths[i - 1], cfg.widths[i - 1], 3, 1, 1, rng);
    }
    out_ = nn::Conv2d<T>(cfg.widths[0], cfg.channels, 3, 1, 1, rng);
  }

  struct Out {
    Var<T> frame;           // N x C x H x W in [-1, 1]
    Var<T> memory_weights;  // addressing rows (R x K)
    bool shrink_fallback = false;
  };

  /// x: N x (T*C) x H x W stacked input window.
  Out forward(const Var<T>& x) const {
    require(x.shape().rank() == 4 && x.shape()[1] == cfg_.input_frames * cfg_.channels,
            "generator expects N x T*C x H x W, got ", x.shape().str());
    require(x.shape()[2] % (Index(1) << (cfg_.widths.size() - 1)) == 0 &&
                x.shape()[3] % (Index(1) << (cfg_.widths.size() - 1)) == 0,
            "generator input ", x.shape().str(), " not divisible by the downsampling factor");
    std::vector<Var<T>> skips;
    Var<T> cur = x;
    for (std::size_t i = 0; i < enc_a_.size(); ++i) {
      cur = relu(enc_a_[i](cur));
      cur = relu(enc_b_[i](cur));
      skips.push_back(cur);
    }

    Out out;
    const Index N = cur.shape()[0], h = cur.shape()[2], w = cur.shape()[3];
    if (cfg_.memory_per_location) {
      MemoryAddress<T> addr = memory_address_rows(nchw_to_rows(cur), memory_);
      cur = rows_to_nchw(addr.output, N, h, w);
      out.memory_weights = addr.weights;
      out.shrink_fallback = addr.shrink_fallback;
    } else {
      MemoryAddress<T> addr = memory_address_rows(pool_rows(cur), memory_);
      cur = broadcast_rows_to_nchw(addr.output, h, w);
      out.memory_weights = addr.weights;
      out.shrink_fallback = addr.shrink_fallback;
    }

    for (std::size_t i = 0; i < dec_up_.size(); ++i) {
      cur = relu(dec_up_[i](upsample_nearest2x(cur)));
      const Var<T>& skip = skips[skips.size() - 2 - i];
      cur = relu(dec_fuse_[i](concat_channels(cur, skip)));
    }
    out.frame = xvad::tanh(out_(cur));
    return out;
  }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> p;
    for (std::size_t i = 0; i < enc_a_.size(); ++i) {
      enc_a_[i].collect("g.enc" + std::to_string(i) + "a", p);
      enc_b_[i].collect("g.enc" + std::to_string(i) + "b", p);
    }
    p.emplace_back("g.memory", memory_.items());
    for (std::size_t i = 0; i < dec_up_.size(); ++i) {
      dec_up_[i].collect("g.dec" + std::to_string(i) + "up", p);
      dec_fuse_[i].collect("g.dec" + std::to_string(i) + "fuse", p);
    }
    out_.collect("g.out", p);
    return p;
  }

  const GeneratorConfig& config() const { return cfg_; }
  MemoryBank<T>& memory() { return memory_; }
  const MemoryBank<T>& memory() const { return memory_; }

 private:
  /// (N, Q, h, w) -> (N, Q) mean over locations, kept differentiable.
  static Var<T> pool_rows(const Var<T>& nchw) {
    const Index N = nchw.shape()[0], HW = nchw.shape()[2] * nchw.shape()[3];
    Var<T> rows = nchw_to_rows(nchw);  // (N*HW, Q)
    Tensor<T> pool(Shape::mat(N, N * HW));
    for (Index n = 0; n < N; ++n)
      for (Index i = 0; i < HW; ++i) pool[n * (N * HW) + n * HW + i] = T(1) / T(HW);
    return matmul(Var<T>(pool, false), rows);
  }

  GeneratorConfig cfg_;
  std::vector<nn::Conv2d<T>> enc_a_, enc_b_, dec_up_, dec_fuse_;
  MemoryBank<T> memory_;
  nn::Conv2d<T> out_;
};

}  // namespace xvad
