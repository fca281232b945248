#pragma once

#include <cmath>
#include <vector>

#include "xvad/core/autodiff.hpp"
#include "xvad/nn/layers.hpp"

namespace xvad::nn {

/// Adam with bias correction. Moment buffers pair with parameters by
/// registration order, which checkpointing relies on being stable.
template <typename T>
class Adam {
 public:
  Adam() = default;

  Adam(ParamList<T> params, T lr, T beta1, T beta2, T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& [name, p] : params_) {
      m_.push_back(Tensor<T>::zeros(p.shape()));
      v_.push_back(Tensor<T>::zeros(p.shape()));
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  /// Applies one update to every parameter that accumulated a gradient.
  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, T(t_));
    const T bc2 = T(1) - std::pow(beta2_, T(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var<T>& p = params_[i].second;
      if (!p.has_grad()) continue;
      const Tensor<T>& g = p.grad();
      Tensor<T>& val = p.mutable_value();
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      const Index n = val.numel();
      for (Index j = 0; j < n; ++j) {
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
        const T mhat = m[j] / bc1;
        const T vhat = v[j] / bc2;
        val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  const ParamList<T>& params() const { return params_; }
  ParamList<T>& params_mut() { return params_; }
  std::vector<Tensor<T>>& moments_m() { return m_; }
  std::vector<Tensor<T>>& moments_v() { return v_; }
  long long& step_count() { return t_; }
  T learning_rate() const { return lr_; }

 private:
  ParamList<T> params_;
  std::vector<Tensor<T>> m_, v_;
  long long t_ = 0;
  T lr_ = T(0), beta1_ = T(0.9), beta2_ = T(0.999), eps_ = T(1e-8);
};

}  // namespace xvad::nn
