#pragma once

#include <cmath>
#include <vector>

#include "xvad/core/conv.hpp"
#include "xvad/core/ops.hpp"

namespace xvad::loss {

/// Mean squared error over all elements.
template <typename T>
Var<T> mse(const Var<T>& pred, const Var<T>& target) {
  require(pred.shape() == target.shape(), "mse: shape ", pred.shape().str(), " vs ",
          target.shape().str());
  return mean(square(sub(pred, target)));
}

namespace detail {
template <typename T>
Tensor<T> gaussian_window(int size, double sigma) {
  Tensor<T> k(Shape::mat(size, size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2.0 * sigma * sigma));
      k[y * size + x] = static_cast<T>(v);
      total += v;
    }
  for (Index i = 0; i < k.numel(); ++i) k[i] = static_cast<T>(k[i] / total);
  return k;
}
}  // namespace detail

/// 1 - SSIM with a Gaussian window (default 11x11, sigma 1.5) at dynamic
/// range 1; inputs are expected in [0, 1]. C1 = 0.01^2, C2 = 0.03^2.
template <typename T>
Var<T> ssim_loss(const Var<T>& a, const Var<T>& b, int window = 11, double sigma = 1.5) {
  require(a.shape() == b.shape(), "ssim: shape ", a.shape().str(), " vs ", b.shape().str());
  require(a.shape().rank() == 4, "ssim expects NCHW");
  require(a.shape()[2] >= window && a.shape()[3] >= window, "ssim: frame ", a.shape().str(),
          " smaller than ", window, "x", window, " window");
  const Tensor<T> kernel = detail::gaussian_window<T>(window, sigma);
  const T c1 = T(0.01) * T(0.01), c2 = T(0.03) * T(0.03);
  Var<T> mu_a = depthwise_fixed_conv(a, kernel);
  Var<T> mu_b = depthwise_fixed_conv(b, kernel);
  Var<T> a2 = depthwise_fixed_conv(square(a), kernel);
  Var<T> b2 = depthwise_fixed_conv(square(b), kernel);
  Var<T> ab = depthwise_fixed_conv(mul(a, b), kernel);
  Var<T> var_a = sub(a2, square(mu_a));
  Var<T> var_b = sub(b2, square(mu_b));
  Var<T> cov = sub(ab, mul(mu_a, mu_b));
  Var<T> num = mul(add_scalar(mul_scalar(mul(mu_a, mu_b), T(2)), c1),
                   add_scalar(mul_scalar(cov, T(2)), c2));
  Var<T> den = mul(add_scalar(add(square(mu_a), square(mu_b)), c1),
                   add_scalar(add(var_a, var_b), c2));
  return rsub_scalar(T(1), mean(div(num, den)));
}

/// Image gradient-difference loss: | |d pred| - |d target| | over horizontal
/// and vertical neighbor pairs, averaged over all pairs.
template <typename T>
Var<T> gradient_loss(const Var<T>& pred, const Var<T>& target) {
  require(pred.shape() == target.shape(), "gradient_loss: shape ", pred.shape().str(), " vs ",
          target.shape().str());
  const Shape& s = pred.shape();
  const Index pairs_h = s[3] >= 2 ? s[0] * s[1] * s[2] * (s[3] - 1) : 0;
  const Index pairs_v = s[2] >= 2 ? s[0] * s[1] * (s[2] - 1) * s[3] : 0;
  require(pairs_h + pairs_v > 0, "gradient_loss: no neighbor pairs in ", s.str());
  Var<T> total = constant(T(0));
  if (pairs_h > 0) total = add(total, sum(abs(sub(abs(spatial_dx(pred)), abs(spatial_dx(target))))));
  if (pairs_v > 0) total = add(total, sum(abs(sub(abs(spatial_dy(pred)), abs(spatial_dy(target))))));
  return mul_scalar(total, T(1) / T(pairs_h + pairs_v));
}

/// Shannon entropy of addressing weights (0*log0 := 0): mean over rows of
/// sum_i -w_i log w_i. Accepts a vector (single distribution) or (R, K) rows.
template <typename T>
Var<T> memory_entropy(const Var<T>& weights) {
  const Shape& s = weights.shape();
  require(s.rank() == 1 || s.rank() == 2, "memory_entropy expects weights or rows of weights");
  for (Index i = 0; i < weights.value().numel(); ++i)
    require(weights.value()[i] >= T(0), "memory_entropy: negative weight ", weights.value()[i]);
  const Index rows = s.rank() == 2 ? s[0] : 1;
  return mul_scalar(sum(xlogx(weights)), T(-1) / T(rows));
}

/// Normalcy loss: 1/2 E[(N(v_hat)-1)^2] + 1/2 E[N(v_tilde)^2].
template <typename T>
Var<T> normalcy(const Var<T>& n_hat, const Var<T>& n_tilde) {
  require(n_hat.value().numel() > 0 && n_hat.value().numel() == n_tilde.value().numel(),
          "normalcy: batch sizes ", n_hat.value().numel(), " vs ", n_tilde.value().numel());
  return add(mul_scalar(mean(square(add_scalar(n_hat, T(-1)))), T(0.5)),
             mul_scalar(mean(square(n_tilde)), T(0.5)));
}

/// Relative normalcy loss: scores are pushed one unit above / below the other
/// batch's mean score, so only relative differences matter.
template <typename T>
Var<T> relative_normalcy(const Var<T>& n_hat, const Var<T>& n_tilde) {
  require(n_hat.value().numel() > 0 && n_hat.value().numel() == n_tilde.value().numel(),
          "relative_normalcy: batch sizes ", n_hat.value().numel(), " vs ",
          n_tilde.value().numel());
  Var<T> mean_tilde = mean(n_tilde);
  Var<T> mean_hat = mean(n_hat);
  Var<T> first = mean(square(add_scalar(sub(n_hat, mean_tilde), T(-1))));
  Var<T> second = mean(square(add_scalar(sub(n_tilde, mean_hat), T(1))));
  return mul_scalar(add(first, second), T(0.5));
}

/// Attention affirmation: the whole scene should support "normal"
/// (attention ~ 1 on v_hat) and exactly the pasted region should support
/// "abnormal" (attention ~ mask on v_tilde).
template <typename T>
Var<T> attention_affirmation(const Var<T>& attn_hat, const Var<T>& attn_tilde,
                             const Var<T>& mask_small) {
  require(attn_hat.shape() == attn_tilde.shape() && attn_tilde.shape() == mask_small.shape(),
          "attention_affirmation: shapes ", attn_hat.shape().str(), ", ",
          attn_tilde.shape().str(), ", ", mask_small.shape().str());
  return add(mul_scalar(mean(square(rsub_scalar(T(1), attn_hat))), T(0.5)),
             mul_scalar(mean(square(sub(mask_small, attn_tilde))), T(0.5)));
}

/// Additive angular margin (ArcFace) over vectorized attention maps with two
/// class centres. `attn_rows` holds one raw attention vector per row; label 1
/// marks predicted/augmented-normal rows, 0 pseudo-abnormal rows. Uses the
/// angle-addition identity with cosine clamping; margin only on the target
/// class.
template <typename T>
Var<T> relative_attention(const Var<T>& attn_rows, const std::vector<int>& labels,
                          const Var<T>& centers, T scale, T margin_rad) {
  require(attn_rows.shape().rank() == 2 && centers.shape().rank() == 2 &&
              centers.shape()[0] == 2 && centers.shape()[1] == attn_rows.shape()[1],
          "relative_attention: rows ", attn_rows.shape().str(), " centers ",
          centers.shape().str());
  const Index N = attn_rows.shape()[0], D = attn_rows.shape()[1];
  require(static_cast<Index>(labels.size()) == N, "relative_attention: ", labels.size(),
          " labels for ", N, " rows");
  for (Index r = 0; r < N; ++r) {
    T norm2 = T(0);
    for (Index c = 0; c < D; ++c) {
      const T v = attn_rows.value()[r * D + c];
      norm2 += v * v;
    }
    require(norm2 > T(0), "relative_attention: zero-norm attention vector at row ", r);
  }
  Var<T> x = rows_l2_normalize(attn_rows);
  Var<T> w = rows_l2_normalize(centers);
  Var<T> cosine = clamp(matmul(x, transpose(w)), T(-1) + T(1e-7), T(1) - T(1e-7));
  Var<T> sine = xvad::sqrt(rsub_scalar(T(1), square(cosine)));
  const T cos_m = std::cos(margin_rad), sin_m = std::sin(margin_rad);
  Var<T> with_margin = sub(mul_scalar(cosine, cos_m), mul_scalar(sine, sin_m));
  Tensor<T> one_hot(Shape::mat(N, 2));
  for (Index r = 0; r < N; ++r) one_hot[r * 2 + (labels[static_cast<std::size_t>(r)] ? 1 : 0)] = T(1);
  Var<T> onehot(one_hot, false);
  Var<T> inv(one_hot.map([](T v) { return T(1) - v; }), false);
  Var<T> logits = mul_scalar(add(mul(onehot, with_margin), mul(inv, cosine)), scale);
  Var<T> target_logit = rows_sum(mul(onehot, logits));
  return mean(sub(rows_logsumexp(logits), target_logit));
}

/// Least-squares adversarial terms. The generator term treats the critic as
/// fixed; the discriminator term scores detached fakes against real frames.
template <typename T>
Var<T> adv_generator_term(const Var<T>& d_hat) {
  require(d_hat.value().numel() > 0, "adv_generator_term: empty batch");
  return mul_scalar(mean(square(add_scalar(d_hat, T(-1)))), T(0.5));
}

template <typename T>
Var<T> adv_discriminator_term(const Var<T>& d_hat, const Var<T>& d_real) {
  require(d_hat.value().numel() > 0 && d_real.value().numel() > 0,
          "adv_discriminator_term: empty batch");
  return add(mul_scalar(mean(square(d_hat)), T(0.5)),
             mul_scalar(mean(square(add_scalar(d_real, T(-1)))), T(0.5)));
}

template <typename T>
struct AdversarialPair {
  Var<T> generator_term, discriminator_term;
};

template <typename T>
AdversarialPair<T> adversarial(const Var<T>& d_hat, const Var<T>& d_real) {
  return {adv_generator_term(d_hat), adv_discriminator_term(d_hat, d_real)};
}

}  // namespace xvad::loss
