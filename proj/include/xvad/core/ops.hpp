#pragma once

#include <cmath>
#include <vector>

#include "xvad/core/autodiff.hpp"
#include "xvad/core/gemm.hpp"

namespace xvad {

// ---------------------------------------------------------------------------
// Elementwise binary ops. Operands must have equal shapes, or one side may be
// a 1-element tensor which broadcasts against the other.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> bcast_reduce(const Tensor<T>& g, const Shape& target) {
  if (g.shape() == target) return g;
  // Broadcast source was a scalar: fold the incoming gradient back down.
  T acc = T(0);
  for (Index i = 0; i < g.numel(); ++i) acc += g[i];
  Tensor<T> r(target);
  r[0] = acc;
  return r;
}

template <typename T, typename FwdF>
Tensor<T> bcast_apply(const Tensor<T>& a, const Tensor<T>& b, FwdF&& f, const char* name) {
  const bool as = a.numel() == 1, bs = b.numel() == 1;
  require(a.shape() == b.shape() || as || bs, name, ": shape ", a.shape().str(), " vs ",
          b.shape().str());
  const Shape& s = as ? b.shape() : a.shape();
  Tensor<T> out(s);
  const Index n = s.numel();
  for (Index i = 0; i < n; ++i) out[i] = f(a[as ? 0 : i], b[bs ? 0 : i]);
  return out;
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tensor<T> y = detail::bcast_apply<T>(a.value(), b.value(), [](T x, T z) { return x + z; }, "add");
  return Var<T>::make_op(y, {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad()) a.accum_grad(detail::bcast_reduce(g, a.shape()));
    if (b.requires_grad()) b.accum_grad(detail::bcast_reduce(g, b.shape()));
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tensor<T> y = detail::bcast_apply<T>(a.value(), b.value(), [](T x, T z) { return x - z; }, "sub");
  return Var<T>::make_op(y, {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad()) a.accum_grad(detail::bcast_reduce(g, a.shape()));
    if (b.requires_grad()) b.accum_grad(detail::bcast_reduce(g.map([](T v) { return -v; }), b.shape()));
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tensor<T> y = detail::bcast_apply<T>(a.value(), b.value(), [](T x, T z) { return x * z; }, "mul");
  return Var<T>::make_op(y, {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad())
      a.accum_grad(detail::bcast_reduce(
          detail::bcast_apply<T>(g, b.value(), [](T gv, T bv) { return gv * bv; }, "mul.bwd"),
          a.shape()));
    if (b.requires_grad())
      b.accum_grad(detail::bcast_reduce(
          detail::bcast_apply<T>(g, a.value(), [](T gv, T av) { return gv * av; }, "mul.bwd"),
          b.shape()));
  });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  Tensor<T> y = detail::bcast_apply<T>(a.value(), b.value(), [](T x, T z) { return x / z; }, "div");
  return Var<T>::make_op(y, {a, b}, [a, b](const Tensor<T>& g) {
    if (a.requires_grad())
      a.accum_grad(detail::bcast_reduce(
          detail::bcast_apply<T>(g, b.value(), [](T gv, T bv) { return gv / bv; }, "div.bwd"),
          a.shape()));
    if (b.requires_grad()) {
      Tensor<T> num = detail::bcast_apply<T>(g, a.value(), [](T gv, T av) { return gv * av; }, "div.bwd");
      Tensor<T> gb = detail::bcast_apply<T>(num, b.value(),
                                            [](T nv, T bv) { return -nv / (bv * bv); }, "div.bwd");
      b.accum_grad(detail::bcast_reduce(gb, b.shape()));
    }
  });
}

template <typename T>
Var<T> constant(T v) {
  return Var<T>(Tensor<T>::scalar(v), false);
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> y = a.value().map([s](T v) { return v + s; });
  return Var<T>::make_op(y, {a}, [a](const Tensor<T>& g) { a.accum_grad(g); });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  Tensor<T> y = a.value().map([s](T v) { return v * s; });
  return Var<T>::make_op(y, {a}, [a, s](const Tensor<T>& g) {
    a.accum_grad(g.map([s](T v) { return v * s; }));
  });
}

/// s - a
template <typename T>
Var<T> rsub_scalar(T s, const Var<T>& a) {
  return add_scalar(mul_scalar(a, T(-1)), s);
}

template <typename T> Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T> Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T> Var<T> operator*(const Var<T>& a, T s) { return mul_scalar(a, s); }
template <typename T> Var<T> operator*(T s, const Var<T>& a) { return mul_scalar(a, s); }
template <typename T> Var<T> operator+(const Var<T>& a, T s) { return add_scalar(a, s); }
template <typename T> Var<T> operator-(const Var<T>& a, T s) { return add_scalar(a, -s); }

// ---------------------------------------------------------------------------
// Elementwise unary ops.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return v > T(0) ? v : T(0); });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? g[i] : T(0);
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  Tensor<T> y = a.value().map([slope](T v) { return v > T(0) ? v : slope * v; });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x, slope](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = x[i] > T(0) ? g[i] : slope * g[i];
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return std::tanh(v); });
  return Var<T>::make_op(y, {a}, [a, y](const Tensor<T>& g) {
    Tensor<T> gx(y.shape());
    for (Index i = 0; i < y.numel(); ++i) gx[i] = g[i] * (T(1) - y[i] * y[i]);
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return T(1) / (T(1) + std::exp(-v)); });
  return Var<T>::make_op(y, {a}, [a, y](const Tensor<T>& g) {
    Tensor<T> gx(y.shape());
    for (Index i = 0; i < y.numel(); ++i) gx[i] = g[i] * y[i] * (T(1) - y[i]);
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return v < T(0) ? -v : v; });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = x[i] < T(0) ? -g[i] : (x[i] > T(0) ? g[i] : T(0));
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return v * v; });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = T(2) * x[i] * g[i];
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return std::sqrt(v); });
  return Var<T>::make_op(y, {a}, [a, y](const Tensor<T>& g) {
    Tensor<T> gx(y.shape());
    for (Index i = 0; i < y.numel(); ++i) gx[i] = g[i] / (T(2) * y[i]);
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return std::exp(v); });
  return Var<T>::make_op(y, {a}, [a, y](const Tensor<T>& g) {
    Tensor<T> gx(y.shape());
    for (Index i = 0; i < y.numel(); ++i) gx[i] = g[i] * y[i];
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  Tensor<T> y = a.value().map([](T v) { return std::log(v); });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = g[i] / x[i];
    a.accum_grad(gx);
  });
}

/// Gradient is identity inside [lo, hi], zero outside.
template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> y = a.value().map([lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x, lo, hi](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i) gx[i] = (x[i] >= lo && x[i] <= hi) ? g[i] : T(0);
    a.accum_grad(gx);
  });
}

/// x*log(x) with the 0*log(0) := 0 convention.
template <typename T>
Var<T> xlogx(const Var<T>& a) {
  constexpr T tiny = T(1e-30);
  Tensor<T> y = a.value().map([](T v) { return v > tiny ? v * std::log(v) : T(0); });
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index i = 0; i < x.numel(); ++i)
      gx[i] = x[i] > tiny ? g[i] * (std::log(x[i]) + T(1)) : T(0);
    a.accum_grad(gx);
  });
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum(const Var<T>& a) {
  T acc = T(0);
  for (Index i = 0; i < a.value().numel(); ++i) acc += a.value()[i];
  Shape s = a.shape();
  return Var<T>::make_op(Tensor<T>::scalar(acc), {a}, [a, s](const Tensor<T>& g) {
    a.accum_grad(Tensor<T>::full(s, g[0]));
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const Index n = a.value().numel();
  require(n > 0, "mean of empty tensor");
  T acc = T(0);
  for (Index i = 0; i < n; ++i) acc += a.value()[i];
  Shape s = a.shape();
  return Var<T>::make_op(Tensor<T>::scalar(acc / T(n)), {a}, [a, s, n](const Tensor<T>& g) {
    a.accum_grad(Tensor<T>::full(s, g[0] / T(n)));
  });
}

/// NCHW -> (N,): mean over channels and space per sample.
template <typename T>
Var<T> spatial_mean_per_sample(const Var<T>& a) {
  require(a.shape().rank() == 4, "spatial_mean_per_sample expects NCHW, got ", a.shape().str());
  const Index N = a.shape()[0], per = a.value().numel() / N;
  Tensor<T> y(Shape::vec(N));
  for (Index n = 0; n < N; ++n) {
    T acc = T(0);
    for (Index i = 0; i < per; ++i) acc += a.value()[n * per + i];
    y[n] = acc / T(per);
  }
  Shape s = a.shape();
  return Var<T>::make_op(y, {a}, [a, s, N, per](const Tensor<T>& g) {
    Tensor<T> gx(s);
    for (Index n = 0; n < N; ++n)
      for (Index i = 0; i < per; ++i) gx[n * per + i] = g[n] / T(per);
    a.accum_grad(gx);
  });
}

/// NCHW -> (N,1,H,W): sum over channels.
template <typename T>
Var<T> channel_sum(const Var<T>& a) {
  require(a.shape().rank() == 4, "channel_sum expects NCHW, got ", a.shape().str());
  const Index N = a.shape()[0], C = a.shape()[1], HW = a.shape()[2] * a.shape()[3];
  Tensor<T> y(Shape::nchw(N, 1, a.shape()[2], a.shape()[3]));
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < HW; ++i) y[n * HW + i] += a.value()[(n * C + c) * HW + i];
  Shape s = a.shape();
  return Var<T>::make_op(y, {a}, [a, s, N, C, HW](const Tensor<T>& g) {
    Tensor<T> gx(s);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c)
        for (Index i = 0; i < HW; ++i) gx[(n * C + c) * HW + i] = g[n * HW + i];
    a.accum_grad(gx);
  });
}

/// Per-sample min-max normalization over all of C,H,W. A sample whose spread
/// is below `eps` comes out all-zero (constant-input convention).
template <typename T>
Var<T> minmax_normalize_per_sample(const Var<T>& a, T eps = T(1e-12)) {
  require(a.shape().rank() == 4, "minmax_normalize_per_sample expects NCHW");
  const Index N = a.shape()[0], per = a.value().numel() / N;
  require(a.value().all_finite(), "minmax_normalize_per_sample: non-finite input");
  Tensor<T> y(a.shape());
  std::vector<Index> amin(N), amax(N);
  std::vector<T> lo(N), hi(N);
  for (Index n = 0; n < N; ++n) {
    Index imin = 0, imax = 0;
    for (Index i = 1; i < per; ++i) {
      if (a.value()[n * per + i] < a.value()[n * per + imin]) imin = i;
      if (a.value()[n * per + i] > a.value()[n * per + imax]) imax = i;
    }
    amin[n] = imin;
    amax[n] = imax;
    lo[n] = a.value()[n * per + imin];
    hi[n] = a.value()[n * per + imax];
    const T d = hi[n] - lo[n];
    if (d > eps)
      for (Index i = 0; i < per; ++i) y[n * per + i] = (a.value()[n * per + i] - lo[n]) / d;
  }
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x, amin, amax, lo, hi, N, per, eps](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index n = 0; n < N; ++n) {
      const T d = hi[n] - lo[n];
      if (d <= eps) continue;
      T gmin = T(0), gmax = T(0);
      for (Index i = 0; i < per; ++i) {
        const T gi = g[n * per + i];
        gx[n * per + i] += gi / d;
        gmin += gi * (x[n * per + i] - hi[n]) / (d * d);
        gmax -= gi * (x[n * per + i] - lo[n]) / (d * d);
      }
      gx[n * per + amin[n]] += gmin;
      gx[n * per + amax[n]] += gmax;
    }
    a.accum_grad(gx);
  });
}

// ---------------------------------------------------------------------------
// Row-wise ops on matrices (R, C).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> rows_sum(const Var<T>& a) {
  require(a.shape().rank() == 2, "rows_sum expects a matrix, got ", a.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(Shape::mat(R, 1));
  for (Index r = 0; r < R; ++r) {
    T acc = T(0);
    for (Index c = 0; c < C; ++c) acc += a.value()[r * C + c];
    y[r] = acc;
  }
  return Var<T>::make_op(y, {a}, [a, R, C](const Tensor<T>& g) {
    Tensor<T> gx(Shape::mat(R, C));
    for (Index r = 0; r < R; ++r)
      for (Index c = 0; c < C; ++c) gx[r * C + c] = g[r];
    a.accum_grad(gx);
  });
}

/// y_rc = x_rc / d_r with d of shape (R, 1).
template <typename T>
Var<T> div_rowwise(const Var<T>& a, const Var<T>& d) {
  require(a.shape().rank() == 2 && d.shape().rank() == 2 && d.shape()[1] == 1 &&
              d.shape()[0] == a.shape()[0],
          "div_rowwise: ", a.shape().str(), " vs ", d.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(a.shape());
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c) y[r * C + c] = a.value()[r * C + c] / d.value()[r];
  Tensor<T> x = a.value(), dv = d.value();
  return Var<T>::make_op(y, {a, d}, [a, d, x, dv, R, C](const Tensor<T>& g) {
    if (a.requires_grad()) {
      Tensor<T> gx(Shape::mat(R, C));
      for (Index r = 0; r < R; ++r)
        for (Index c = 0; c < C; ++c) gx[r * C + c] = g[r * C + c] / dv[r];
      a.accum_grad(gx);
    }
    if (d.requires_grad()) {
      Tensor<T> gd(Shape::mat(R, 1));
      for (Index r = 0; r < R; ++r) {
        T acc = T(0);
        for (Index c = 0; c < C; ++c) acc += g[r * C + c] * x[r * C + c];
        gd[r] = -acc / (dv[r] * dv[r]);
      }
      d.accum_grad(gd);
    }
  });
}

/// Rows scaled to unit L2 norm; `eps` is added under the square root.
template <typename T>
Var<T> rows_l2_normalize(const Var<T>& a, T eps = T(1e-12)) {
  require(a.shape().rank() == 2, "rows_l2_normalize expects a matrix, got ", a.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(a.shape());
  std::vector<T> norms(static_cast<std::size_t>(R));
  for (Index r = 0; r < R; ++r) {
    T s = T(0);
    for (Index c = 0; c < C; ++c) {
      const T v = a.value()[r * C + c];
      s += v * v;
    }
    const T n = std::sqrt(s + eps);
    norms[static_cast<std::size_t>(r)] = n;
    for (Index c = 0; c < C; ++c) y[r * C + c] = a.value()[r * C + c] / n;
  }
  Tensor<T> x = a.value();
  return Var<T>::make_op(y, {a}, [a, x, y, norms, R, C](const Tensor<T>& g) {
    Tensor<T> gx(x.shape());
    for (Index r = 0; r < R; ++r) {
      const T n = norms[static_cast<std::size_t>(r)];
      T dot = T(0);
      for (Index c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
      for (Index c = 0; c < C; ++c) gx[r * C + c] = (g[r * C + c] - y[r * C + c] * dot) / n;
    }
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  require(a.shape().rank() == 2, "softmax_rows expects a matrix, got ", a.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(a.shape());
  for (Index r = 0; r < R; ++r) {
    T mx = a.value()[r * C];
    for (Index c = 1; c < C; ++c) mx = std::max(mx, a.value()[r * C + c]);
    T z = T(0);
    for (Index c = 0; c < C; ++c) {
      const T e = std::exp(a.value()[r * C + c] - mx);
      y[r * C + c] = e;
      z += e;
    }
    for (Index c = 0; c < C; ++c) y[r * C + c] /= z;
  }
  return Var<T>::make_op(y, {a}, [a, y, R, C](const Tensor<T>& g) {
    Tensor<T> gx(y.shape());
    for (Index r = 0; r < R; ++r) {
      T dot = T(0);
      for (Index c = 0; c < C; ++c) dot += g[r * C + c] * y[r * C + c];
      for (Index c = 0; c < C; ++c) gx[r * C + c] = y[r * C + c] * (g[r * C + c] - dot);
    }
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> rows_logsumexp(const Var<T>& a) {
  require(a.shape().rank() == 2, "rows_logsumexp expects a matrix, got ", a.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(Shape::mat(R, 1));
  Tensor<T> soft(a.shape());
  for (Index r = 0; r < R; ++r) {
    T mx = a.value()[r * C];
    for (Index c = 1; c < C; ++c) mx = std::max(mx, a.value()[r * C + c]);
    T z = T(0);
    for (Index c = 0; c < C; ++c) {
      const T e = std::exp(a.value()[r * C + c] - mx);
      soft[r * C + c] = e;
      z += e;
    }
    for (Index c = 0; c < C; ++c) soft[r * C + c] /= z;
    y[r] = mx + std::log(z);
  }
  return Var<T>::make_op(y, {a}, [a, soft, R, C](const Tensor<T>& g) {
    Tensor<T> gx(Shape::mat(R, C));
    for (Index r = 0; r < R; ++r)
      for (Index c = 0; c < C; ++c) gx[r * C + c] = g[r] * soft[r * C + c];
    a.accum_grad(gx);
  });
}

// ---------------------------------------------------------------------------
// Matrix / shape ops.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require(a.shape().rank() == 2 && b.shape().rank() == 2 && a.shape()[1] == b.shape()[0],
          "matmul: ", a.shape().str(), " x ", b.shape().str());
  const Index M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  Tensor<T> y(Shape::mat(M, N));
  gemm_nn(a.value().data(), b.value().data(), y.data(), M, K, N);
  Tensor<T> av = a.value(), bv = b.value();
  return Var<T>::make_op(y, {a, b}, [a, b, av, bv, M, K, N](const Tensor<T>& g) {
    if (a.requires_grad()) {
      Tensor<T> ga(Shape::mat(M, K));
      gemm_nt(g.data(), bv.data(), ga.data(), M, N, K);
      a.accum_grad(ga);
    }
    if (b.requires_grad()) {
      Tensor<T> gb(Shape::mat(K, N));
      gemm_tn(av.data(), g.data(), gb.data(), K, M, N);
      b.accum_grad(gb);
    }
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require(a.shape().rank() == 2, "transpose expects a matrix, got ", a.shape().str());
  const Index R = a.shape()[0], C = a.shape()[1];
  Tensor<T> y(Shape::mat(C, R));
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c) y[c * R + r] = a.value()[r * C + c];
  return Var<T>::make_op(y, {a}, [a, R, C](const Tensor<T>& g) {
    Tensor<T> gx(Shape::mat(R, C));
    for (Index r = 0; r < R; ++r)
      for (Index c = 0; c < C; ++c) gx[r * C + c] = g[c * R + r];
    a.accum_grad(gx);
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, const Shape& s) {
  Tensor<T> y = a.value().reshaped(s);
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig](const Tensor<T>& g) {
    a.accum_grad(g.reshaped(orig));
  });
}

/// Concatenation along axis 0 (matrices: rows; NCHW: batch; vectors: entries).
template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_batch: no inputs");
  const Shape& s0 = parts[0].shape();
  Index total = 0;
  for (const auto& p : parts) {
    require(p.shape().rank() == s0.rank(), "concat_batch: rank mismatch");
    for (int i = 1; i < s0.rank(); ++i)
      require(p.shape()[i] == s0[i], "concat_batch: trailing dims differ");
    total += p.shape()[0];
  }
  Shape out_shape;
  if (s0.rank() == 1) out_shape = Shape::vec(total);
  else if (s0.rank() == 2) out_shape = Shape::mat(total, s0[1]);
  else out_shape = Shape::nchw(total, s0[1], s0[2], s0[3]);
  Tensor<T> y(out_shape);
  const Index per = s0.numel() / s0[0];
  Index off = 0;
  std::vector<Index> offsets;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const Index n = p.value().numel();
    for (Index i = 0; i < n; ++i) y[off * per + i] = p.value()[i];
    off += p.shape()[0];
  }
  return Var<T>::make_op(y, parts, [parts, offsets, per](const Tensor<T>& g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!parts[k].requires_grad()) continue;
      Tensor<T> gp(parts[k].shape());
      const Index n = gp.numel();
      for (Index i = 0; i < n; ++i) gp[i] = g[offsets[k] * per + i];
      parts[k].accum_grad(gp);
    }
  });
}

/// Slice [from, from+len) along axis 0.
template <typename T>
Var<T> slice_batch(const Var<T>& a, Index from, Index len) {
  const Shape& s = a.shape();
  require(s.rank() >= 1 && from >= 0 && len > 0 && from + len <= s[0], "slice_batch [", from, ",",
          from + len, ") of ", s.str());
  Shape out_shape;
  if (s.rank() == 1) out_shape = Shape::vec(len);
  else if (s.rank() == 2) out_shape = Shape::mat(len, s[1]);
  else out_shape = Shape::nchw(len, s[1], s[2], s[3]);
  const Index per = s.numel() / s[0];
  Tensor<T> y(out_shape);
  for (Index i = 0; i < len * per; ++i) y[i] = a.value()[from * per + i];
  Shape orig = s;
  return Var<T>::make_op(y, {a}, [a, orig, from, len, per](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index i = 0; i < len * per; ++i) gx[from * per + i] = g[i];
    a.accum_grad(gx);
  });
}

/// Horizontal neighbor differences: NCHW -> (N,C,H,W-1), y = x[...,1:] - x[...,:-1].
template <typename T>
Var<T> spatial_dx(const Var<T>& a) {
  require(a.shape().rank() == 4 && a.shape()[3] >= 2, "spatial_dx expects NCHW with W >= 2");
  const Index NC = a.shape()[0] * a.shape()[1], H = a.shape()[2], W = a.shape()[3];
  Tensor<T> y(Shape::nchw(a.shape()[0], a.shape()[1], H, W - 1));
  for (Index p = 0; p < NC * H; ++p)
    for (Index x = 0; x < W - 1; ++x)
      y[p * (W - 1) + x] = a.value()[p * W + x + 1] - a.value()[p * W + x];
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig, NC, H, W](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index p = 0; p < NC * H; ++p)
      for (Index x = 0; x < W - 1; ++x) {
        gx[p * W + x + 1] += g[p * (W - 1) + x];
        gx[p * W + x] -= g[p * (W - 1) + x];
      }
    a.accum_grad(gx);
  });
}

/// Vertical neighbor differences: NCHW -> (N,C,H-1,W).
template <typename T>
Var<T> spatial_dy(const Var<T>& a) {
  require(a.shape().rank() == 4 && a.shape()[2] >= 2, "spatial_dy expects NCHW with H >= 2");
  const Index NC = a.shape()[0] * a.shape()[1], H = a.shape()[2], W = a.shape()[3];
  Tensor<T> y(Shape::nchw(a.shape()[0], a.shape()[1], H - 1, W));
  for (Index p = 0; p < NC; ++p)
    for (Index r = 0; r < H - 1; ++r)
      for (Index x = 0; x < W; ++x)
        y[(p * (H - 1) + r) * W + x] =
            a.value()[(p * H + r + 1) * W + x] - a.value()[(p * H + r) * W + x];
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig, NC, H, W](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index p = 0; p < NC; ++p)
      for (Index r = 0; r < H - 1; ++r)
        for (Index x = 0; x < W; ++x) {
          gx[(p * H + r + 1) * W + x] += g[(p * (H - 1) + r) * W + x];
          gx[(p * H + r) * W + x] -= g[(p * (H - 1) + r) * W + x];
        }
    a.accum_grad(gx);
  });
}

/// (N, C) rows replicated over an h x w grid -> (N, C, h, w).
template <typename T>
Var<T> broadcast_rows_to_nchw(const Var<T>& a, Index h, Index w) {
  require(a.shape().rank() == 2, "broadcast_rows_to_nchw expects (N, C) rows");
  const Index N = a.shape()[0], C = a.shape()[1], HW = h * w;
  Tensor<T> y(Shape::nchw(N, C, h, w));
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < HW; ++i) y[(n * C + c) * HW + i] = a.value()[n * C + c];
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig, N, C, HW](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c) {
        T acc = T(0);
        for (Index i = 0; i < HW; ++i) acc += g[(n * C + c) * HW + i];
        gx[n * C + c] = acc;
      }
    a.accum_grad(gx);
  });
}

/// NCHW -> (N*H*W, C) rows, one feature vector per spatial location.
template <typename T>
Var<T> nchw_to_rows(const Var<T>& a) {
  require(a.shape().rank() == 4, "nchw_to_rows expects NCHW");
  const Index N = a.shape()[0], C = a.shape()[1], H = a.shape()[2], W = a.shape()[3];
  const Index HW = H * W;
  Tensor<T> y(Shape::mat(N * HW, C));
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < HW; ++i) y[(n * HW + i) * C + c] = a.value()[(n * C + c) * HW + i];
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig, N, C, HW](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c)
        for (Index i = 0; i < HW; ++i) gx[(n * C + c) * HW + i] = g[(n * HW + i) * C + c];
    a.accum_grad(gx);
  });
}

/// Inverse of nchw_to_rows.
template <typename T>
Var<T> rows_to_nchw(const Var<T>& a, Index N, Index H, Index W) {
  require(a.shape().rank() == 2 && a.shape()[0] == N * H * W, "rows_to_nchw: ", a.shape().str());
  const Index C = a.shape()[1], HW = H * W;
  Tensor<T> y(Shape::nchw(N, C, H, W));
  for (Index n = 0; n < N; ++n)
    for (Index c = 0; c < C; ++c)
      for (Index i = 0; i < HW; ++i) y[(n * C + c) * HW + i] = a.value()[(n * HW + i) * C + c];
  Shape orig = a.shape();
  return Var<T>::make_op(y, {a}, [a, orig, N, C, HW](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index n = 0; n < N; ++n)
      for (Index c = 0; c < C; ++c)
        for (Index i = 0; i < HW; ++i) gx[(n * HW + i) * C + c] = g[(n * C + c) * HW + i];
    a.accum_grad(gx);
  });
}

}  // namespace xvad
