#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xvad/nn/layers.hpp"

namespace xvad {

/// Frozen, randomly initialized CNN used to localize foreground objects.
/// Parameters are fixed at construction from the seed and never receive
/// gradients; the same (architecture, seed) pair reproduces them bit-exactly.
///
/// Architectures:
///   "rand_tiny"     - 4 conv stages, feature map at 1/8 resolution (cheap,
///                     the toy-scale default)
///   "rand_resnet50" - 50-layer bottleneck residual network, features taken
///                     before the classification head (reference default)
template <typename T = float>
class FrozenFeatureExtractor {
 public:
  FrozenFeatureExtractor(const std::string& architecture, std::uint64_t seed)
      : architecture_(architecture), seed_(seed) {
    Rng rng(Rng::mix(seed, 0x0f2e));
    if (architecture == "rand_tiny") {
      convs_.emplace_back(3, 32, 3, 1, 1, rng, false);
      convs_.emplace_back(32, 64, 3, 2, 1, rng, false);
      convs_.emplace_back(64, 96, 3, 2, 1, rng, false);
      convs_.emplace_back(96, 128, 3, 2, 1, rng, false);
    } else if (architecture == "rand_resnet50") {
      stem_ = nn::Conv2d<T>(3, 64, 7, 2, 3, rng, false);
      Index cin = 64;
      const Index stage_out[4] = {256, 512, 1024, 2048};
      const int blocks[4] = {3, 4, 6, 3};
      for (int s = 0; s < 4; ++s) {
        const Index mid = stage_out[s] / 4;
        for (int b = 0; b < blocks[s]; ++b) {
          Block blk;
          const int stride = (b == 0 && s > 0) ? 2 : 1;
          blk.reduce = nn::Conv2d<T>(cin, mid, 1, 1, 0, rng, false);
          blk.spatial = nn::Conv2d<T>(mid, mid, 3, stride, 1, rng, false);
          blk.expand = nn::Conv2d<T>(mid, stage_out[s], 1, 1, 0, rng, false);
          blk.projects = (b == 0);
          if (blk.projects) blk.project = nn::Conv2d<T>(cin, stage_out[s], 1, stride, 0, rng, false);
          blocks_.push_back(std::move(blk));
          cin = stage_out[s];
        }
      }
    } else {
      throw ConfigError("unknown extractor architecture '" + architecture + "'");
    }
  }

  /// CHW frame in [-1, 1] -> d x h x w feature tensor.
  Tensor<T> features(const Tensor<T>& frame) const {
    require(frame.shape().rank() == 3 && frame.shape()[0] == 3, "extractor expects 3xHxW, got ",
            frame.shape().str());
    NoGradGuard no_grad;
    Var<T> x(frame.reshaped(Shape::nchw(1, 3, frame.shape()[1], frame.shape()[2])));
    if (architecture_ == "rand_tiny") {
      for (const auto& conv : convs_) x = relu(conv(x));
    } else {
      x = maxpool2d(relu(stem_(x)), 2);
      for (const auto& blk : blocks_) {
        Var<T> shortcut = blk.projects ? blk.project(x) : x;
        Var<T> y = relu(blk.reduce(x));
        y = relu(blk.spatial(y));
        y = blk.expand(y);
        // Residual branch scaled down so fifty random layers stay in range.
        x = relu(add(shortcut, mul_scalar(y, T(0.5))));
      }
    }
    const Shape& s = x.shape();
    return x.value().reshaped(Shape{s[1], s[2], s[3]});
  }

  const std::string& architecture() const { return architecture_; }
  std::uint64_t seed() const { return seed_; }

  /// FNV-1a over all parameter bytes; the frozen-weights invariant checks
  /// this before and after training.
  std::uint64_t param_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto eat = [&h](const Tensor<T>& t) {
      const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
      const std::size_t bytes = static_cast<std::size_t>(t.numel()) * sizeof(T);
      for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
      }
    };
    for (const auto& c : convs_) {
      eat(c.weight().value());
      eat(c.bias().value());
    }
    if (stem_.weight().defined()) {
      eat(stem_.weight().value());
      eat(stem_.bias().value());
    }
    for (const auto& b : blocks_) {
      eat(b.reduce.weight().value());
      eat(b.spatial.weight().value());
      eat(b.expand.weight().value());
      if (b.projects) eat(b.project.weight().value());
    }
    return h;
  }

 private:
  struct Block {
    nn::Conv2d<T> reduce, spatial, expand, project;
    bool projects = false;
  };

  std::string architecture_;
  std::uint64_t seed_;
  std::vector<nn::Conv2d<T>> convs_;  // rand_tiny
  nn::Conv2d<T> stem_;                // rand_resnet50
  std::vector<Block> blocks_;
};

}  // namespace xvad
