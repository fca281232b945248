#pragma once

#include <cmath>

#include "xvad/core/ops.hpp"
#include "xvad/loss/weights.hpp"

namespace xvad::loss {

/// Scalar loss components entering the three objectives. Works with plain
/// doubles (logging, tests) and with autodiff scalars (training graphs).
template <typename S>
struct ObjectiveTerms {
  S mse{}, ssim{}, grad{}, memory_entropy{};
  S adv_gen{}, adv_disc{}, normalcy_gen{};  // normalcy_gen = E[1/2 (N(v_hat)-1)^2]
  S n{}, rn{}, aa{}, raa{};
};

template <typename S>
struct Objectives {
  S generator{}, discriminator{}, classifier{};
};

namespace detail {
inline double scaled(double v, double w) { return w * v; }
template <typename T>
Var<T> scaled(const Var<T>& v, double w) {
  return mul_scalar(v, static_cast<T>(w));
}
inline void check_term(double v, const char* name) {
  require<NumericError>(std::isfinite(v), "compose_objectives: non-finite component '", name, "'");
}
template <typename T>
void check_term(const Var<T>& v, const char* name) {
  require<NumericError>(v.value().numel() == 1 && std::isfinite(static_cast<double>(v.value()[0])),
                        "compose_objectives: non-finite component '", name, "'");
}
}  // namespace detail

/// Weighted sums:
///   generator     = (mse + ssim + grad) + a_mem * memory_entropy
///                   + a_d * adv_gen + a_n * normalcy_gen
///   discriminator = adv_disc
///   classifier    = w_n * n + w_rn * rn + w_aa * aa + w_raa * raa
template <typename S>
Objectives<S> compose_objectives(const ObjectiveTerms<S>& t, const LossWeights& w) {
  detail::check_term(t.mse, "mse");
  detail::check_term(t.ssim, "ssim");
  detail::check_term(t.grad, "grad");
  detail::check_term(t.memory_entropy, "memory_entropy");
  detail::check_term(t.adv_gen, "adv_gen");
  detail::check_term(t.adv_disc, "adv_disc");
  detail::check_term(t.normalcy_gen, "normalcy_gen");
  detail::check_term(t.n, "n");
  detail::check_term(t.rn, "rn");
  detail::check_term(t.aa, "aa");
  detail::check_term(t.raa, "raa");
  Objectives<S> out;
  S backbone = t.mse + t.ssim + t.grad + detail::scaled(t.memory_entropy, w.alpha_mem);
  out.generator = backbone + detail::scaled(t.adv_gen, w.alpha_d) +
                  detail::scaled(t.normalcy_gen, w.alpha_n);
  out.discriminator = t.adv_disc;
  out.classifier = detail::scaled(t.n, w.w_n) + detail::scaled(t.rn, w.w_rn) +
                   detail::scaled(t.aa, w.w_aa) + detail::scaled(t.raa, w.w_raa);
  return out;
}

}  // namespace xvad::loss
