#pragma once

#include <map>
#include <string>
#include <vector>

#include "xvad/nn/layers.hpp"

namespace xvad {

/// Patch network shared by the discriminator and the normalcy classifier:
/// three stride-2 4x4 stages, one stride-1 stage, and a 1-channel head that
/// yields an S x S logit map (70x70 receptive field at the default depth).
/// The sigmoid on the head defaults to off.
struct CriticConfig {
  Index channels = 3;
  std::vector<Index> widths = {64, 128, 256, 512};
  bool sigmoid_output = false;
  bool use_instance_norm = true;
};

template <typename T>
class PatchCritic {
 public:
  PatchCritic() = default;

  PatchCritic(const CriticConfig& cfg, Rng& rng, std::string param_prefix = "d")
      : cfg_(cfg), prefix_(std::move(param_prefix)) {
    require<ConfigError>(cfg.widths.size() >= 2, "critic needs at least two widths");
    Index cin = cfg.channels;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
      const int stride = (i + 1 < cfg.widths.size()) ? 2 : 1;
      stages_.emplace_back(cin, cfg.widths[i], 4, stride, 1, rng);
      if (i > 0 && cfg.use_instance_norm) norms_[i] = nn::InstanceNorm2d<T>(cfg.widths[i]);
      cin = cfg.widths[i];
    }
    head_ = nn::Conv2d<T>(cin, 1, 4, 1, 1, rng);
  }

  struct Out {
    Var<T> logit_map;  // N x 1 x S x S
    Var<T> features;   // penultimate activations, N x C_last x h x w
  };

  Out forward(const Var<T>& x) const {
    require(x.shape().rank() == 4 && x.shape()[1] == cfg_.channels, "critic expects N x ",
            cfg_.channels, " x H x W, got ", x.shape().str());
    Var<T> cur = x;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      cur = stages_[i](cur);
      if (auto it = norms_.find(i); it != norms_.end()) cur = it->second(cur);
      cur = leaky_relu(cur, T(0.2));
    }
    Out out;
    out.features = cur;
    out.logit_map = head_(cur);
    if (cfg_.sigmoid_output) out.logit_map = sigmoid(out.logit_map);
    return out;
  }

  Var<T> logit_map(const Var<T>& x) const { return forward(x).logit_map; }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> p;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      stages_[i].collect(prefix_ + ".stage" + std::to_string(i), p);
      if (auto it = norms_.find(i); it != norms_.end())
        it->second.collect(prefix_ + ".norm" + std::to_string(i), p);
    }
    head_.collect(prefix_ + ".head", p);
    return p;
  }

  const CriticConfig& config() const { return cfg_; }

 private:
  CriticConfig cfg_;
  std::string prefix_;
  std::vector<nn::Conv2d<T>> stages_;
  std::map<std::size_t, nn::InstanceNorm2d<T>> norms_;
  nn::Conv2d<T> head_;
};

/// Scalar critic score per sample: mean over the patch logit map.
template <typename T>
Var<T> critic_score(const Var<T>& logit_map) {
  return spatial_mean_per_sample(logit_map);
}

/// SCDA attention over classifier features: channel sum followed by per-
/// sample min-max normalization, N x 1 x h x w.
template <typename T>
Var<T> extract_attention(const Var<T>& features) {
  return minmax_normalize_per_sample(channel_sum(features));
}

}  // namespace xvad
