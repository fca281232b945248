#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "xvad/core/conv.hpp"
#include "xvad/core/ops.hpp"
#include "xvad/core/random.hpp"

namespace xvad::nn {

template <typename T>
using ParamList = std::vector<std::pair<std::string, Var<T>>>;

/// Kaiming-normal weight tensor for a conv of shape (cout, cin, k, k).
template <typename T>
Tensor<T> kaiming_conv_init(Index cout, Index cin, int k, Rng& rng) {
  Tensor<T> w(Shape::nchw(cout, cin, k, k));
  const double std = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
  for (Index i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, std));
  return w;
}

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;

  Conv2d(Index cin, Index cout, int k, int stride, int pad, Rng& rng, bool trainable = true)
      : stride_(stride), pad_(pad) {
    weight_ = Var<T>(kaiming_conv_init<T>(cout, cin, k, rng), trainable);
    bias_ = Var<T>(Tensor<T>::zeros(Shape::vec(cout)), trainable);
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.emplace_back(prefix + ".weight", weight_);
    out.emplace_back(prefix + ".bias", bias_);
  }

  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

 private:
  Var<T> weight_, bias_;
  int stride_ = 1, pad_ = 0;
};

/// Per-sample, per-channel normalization with affine parameters. Stateless
/// across batches, so train and eval behave identically.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  require(x.shape().rank() == 4, "instance_norm expects NCHW");
  const Index N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
  require(gamma.shape() == Shape::vec(C) && beta.shape() == Shape::vec(C),
          "instance_norm affine params must have shape (C,)");
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_sigma(static_cast<std::size_t>(N * C));
  for (Index nc = 0; nc < N * C; ++nc) {
    const T* src = x.value().data() + nc * HW;
    T mu = T(0);
    for (Index i = 0; i < HW; ++i) mu += src[i];
    mu /= T(HW);
    T var = T(0);
    for (Index i = 0; i < HW; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= T(HW);
    const T is = T(1) / std::sqrt(var + eps);
    inv_sigma[static_cast<std::size_t>(nc)] = is;
    T* dst = xhat.data() + nc * HW;
    for (Index i = 0; i < HW; ++i) dst[i] = (src[i] - mu) * is;
  }
  Tensor<T> y(x.shape());
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c) {
      const T g = gamma.value()[c], b = beta.value()[c];
      const T* src = xhat.data() + (n * C + c) * HW;
      T* dst = y.data() + (n * C + c) * HW;
      for (Index i = 0; i < HW; ++i) dst[i] = g * src[i] + b;
    }
  return Var<T>::make_op(
      y, {x, gamma, beta}, [x, gamma, beta, xhat, inv_sigma, N, C, HW](const Tensor<T>& g) {
        if (gamma.requires_grad()) {
          Tensor<T> gg(Shape::vec(C));
          for (Index n = 0; n < N; ++n)
            for (Index c = 0; c < C; ++c) {
              T acc = T(0);
              const Index nc = n * C + c;
              for (Index i = 0; i < HW; ++i) acc += g[nc * HW + i] * xhat[nc * HW + i];
              gg[c] += acc;
            }
          gamma.accum_grad(gg);
        }
        if (beta.requires_grad()) {
          Tensor<T> gb(Shape::vec(C));
          for (Index n = 0; n < N; ++n)
            for (Index c = 0; c < C; ++c) {
              T acc = T(0);
              for (Index i = 0; i < HW; ++i) acc += g[(n * C + c) * HW + i];
              gb[c] += acc;
            }
          beta.accum_grad(gb);
        }
        if (x.requires_grad()) {
          Tensor<T> gx(xhat.shape());
          for (Index n = 0; n < N; ++n)
            for (Index c = 0; c < C; ++c) {
              const Index nc = n * C + c;
              const T gam = gamma.value()[c];
              const T is = inv_sigma[static_cast<std::size_t>(nc)];
              T gmean = T(0), gxhat_mean = T(0);
              for (Index i = 0; i < HW; ++i) {
                gmean += g[nc * HW + i];
                gxhat_mean += g[nc * HW + i] * xhat[nc * HW + i];
              }
              gmean /= T(HW);
              gxhat_mean /= T(HW);
              for (Index i = 0; i < HW; ++i)
                gx[nc * HW + i] =
                    gam * is * (g[nc * HW + i] - gmean - xhat[nc * HW + i] * gxhat_mean);
            }
          x.accum_grad(gx);
        }
      });
}

template <typename T>
class InstanceNorm2d {
 public:
  InstanceNorm2d() = default;

  explicit InstanceNorm2d(Index channels, bool trainable = true)
      : gamma_(Var<T>(Tensor<T>::ones(Shape::vec(channels)), trainable)),
        beta_(Var<T>(Tensor<T>::zeros(Shape::vec(channels)), trainable)) {}

  Var<T> operator()(const Var<T>& x) const { return instance_norm(x, gamma_, beta_); }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.emplace_back(prefix + ".gamma", gamma_);
    out.emplace_back(prefix + ".beta", beta_);
  }

 private:
  Var<T> gamma_, beta_;
};

}  // namespace xvad::nn
