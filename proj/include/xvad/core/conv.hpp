#pragma once

#include <cstring>
#include <vector>

#include "xvad/core/autodiff.hpp"
#include "xvad/core/gemm.hpp"
#include "xvad/core/ops.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xvad {

namespace detail {

struct ConvDims {
  Index N, Cin, H, W, Cout, k, stride, pad, Ho, Wo;
};

inline ConvDims conv_dims(const Shape& x, const Shape& w, int stride, int pad) {
  require(x.rank() == 4 && w.rank() == 4, "conv2d expects NCHW input and OIHW weight");
  require(w[2] == w[3], "conv2d expects square kernels, got ", w.str());
  require(x[1] == w[1], "conv2d channel mismatch: input ", x.str(), " weight ", w.str());
  ConvDims d{x[0], x[1], x[2], x[3], w[0], w[2], stride, pad, 0, 0};
  d.Ho = (d.H + 2 * d.pad - d.k) / d.stride + 1;
  d.Wo = (d.W + 2 * d.pad - d.k) / d.stride + 1;
  require(d.Ho >= 1 && d.Wo >= 1, "conv2d output would be empty for input ", x.str());
  return d;
}

/// Valid output-column range [lo, hi] for a kernel offset, clamped to the face.
inline void ox_range(Index extent, Index out_extent, Index k_off, Index stride, Index pad,
                     Index& lo, Index& hi) {
  // Need 0 <= o*stride - pad + k_off <= extent-1.
  const Index num_lo = pad - k_off;
  lo = num_lo <= 0 ? 0 : (num_lo + stride - 1) / stride;
  hi = (extent - 1 + pad - k_off) / stride;
  if (hi > out_extent - 1) hi = out_extent - 1;
}

/// Reusable per-thread scratch arenas for the conv work buffers; saves the
/// large allocate/zero cycle every call would otherwise pay.
template <typename T>
std::vector<T>& scratch(int slot, std::size_t n) {
  thread_local std::vector<T> bufs[3];
  if (bufs[slot].size() < n) bufs[slot].resize(n);
  return bufs[slot];
}

/// Patch matrix in (Cin*k*k, N*Ho*Wo) layout: each kernel-offset row is a set
/// of contiguous (or strided) runs of the input plane, which keeps the fill
/// memcpy-sized. The returned buffer is the slot-0 scratch arena; padding
/// gaps are zeroed explicitly, so no full clear is needed.
template <typename T>
std::vector<T>& im2col(const Tensor<T>& x, const ConvDims& d) {
  const Index R = d.N * d.Ho * d.Wo, K2 = d.Cin * d.k * d.k;
  std::vector<T>& col = scratch<T>(0, static_cast<std::size_t>(R * K2));
  const T* xp = x.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Index row = 0; row < K2; ++row) {
    const Index c = row / (d.k * d.k);
    const Index ky = (row / d.k) % d.k;
    const Index kx = row % d.k;
    T* dst_row = col.data() + row * R;
    Index ox_lo, ox_hi;
    ox_range(d.W, d.Wo, kx, d.stride, d.pad, ox_lo, ox_hi);
    for (Index n = 0; n < d.N; ++n) {
      const T* plane = xp + (n * d.Cin + c) * d.H * d.W;
      for (Index oy = 0; oy < d.Ho; ++oy) {
        const Index iy = oy * d.stride - d.pad + ky;
        T* dst = dst_row + (n * d.Ho + oy) * d.Wo;
        if (iy < 0 || iy >= d.H || ox_hi < ox_lo) {
          std::memset(dst, 0, static_cast<std::size_t>(d.Wo) * sizeof(T));
          continue;
        }
        if (ox_lo > 0) std::memset(dst, 0, static_cast<std::size_t>(ox_lo) * sizeof(T));
        if (ox_hi < d.Wo - 1)
          std::memset(dst + ox_hi + 1, 0,
                      static_cast<std::size_t>(d.Wo - 1 - ox_hi) * sizeof(T));
        const T* src = plane + iy * d.W + (ox_lo * d.stride - d.pad + kx);
        if (d.stride == 1) {
          std::memcpy(dst + ox_lo, src, static_cast<std::size_t>(ox_hi - ox_lo + 1) * sizeof(T));
        } else {
          for (Index ox = ox_lo; ox <= ox_hi; ++ox)
            dst[ox] = src[(ox - ox_lo) * d.stride];
        }
      }
    }
  }
  return col;
}

/// Scatter-add of a (Cin*k*k, N*Ho*Wo) gradient patch matrix back onto the
/// input layout. Parallel over samples; kernel offsets of one sample overlap,
/// so they stay inside the loop.
template <typename T>
void col2im_add(const std::vector<T>& dcol, const ConvDims& d, Tensor<T>& dx) {
  const Index R = d.N * d.Ho * d.Wo;
  const Index K2 = d.Cin * d.k * d.k;
  T* xp = dx.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Index n = 0; n < d.N; ++n) {
    for (Index row = 0; row < K2; ++row) {
      const Index c = row / (d.k * d.k);
      const Index ky = (row / d.k) % d.k;
      const Index kx = row % d.k;
      Index ox_lo, ox_hi;
      ox_range(d.W, d.Wo, kx, d.stride, d.pad, ox_lo, ox_hi);
      if (ox_hi < ox_lo) continue;
      const T* src_row = dcol.data() + row * R;
      T* plane = xp + (n * d.Cin + c) * d.H * d.W;
      for (Index oy = 0; oy < d.Ho; ++oy) {
        const Index iy = oy * d.stride - d.pad + ky;
        if (iy < 0 || iy >= d.H) continue;
        const T* src = src_row + (n * d.Ho + oy) * d.Wo;
        T* dst = plane + iy * d.W + (ox_lo * d.stride - d.pad + kx);
        for (Index ox = ox_lo; ox <= ox_hi; ++ox)
          dst[(ox - ox_lo) * d.stride] += src[ox];
      }
    }
  }
}

}  // namespace detail

/// 2-D convolution, NCHW input, OIHW weight, optional bias of shape (Cout,).
/// Backward re-runs im2col instead of keeping the patch matrix alive.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  const detail::ConvDims d = detail::conv_dims(x.shape(), w.shape(), stride, pad);
  const Index R = d.N * d.Ho * d.Wo, K2 = d.Cin * d.k * d.k;
  if (b.defined())
    require(b.shape().rank() == 1 && b.shape()[0] == d.Cout, "conv2d bias shape ",
            b.shape().str());

  std::vector<T>& col = detail::im2col(x.value(), d);
  // OutT (Cout, R) = W (Cout, K2) * col (K2, R)
  std::vector<T>& outmat = detail::scratch<T>(1, static_cast<std::size_t>(d.Cout * R));
  gemm_nn(w.value().data(), col.data(), outmat.data(), d.Cout, K2, R);

  Tensor<T> y(Shape::nchw(d.N, d.Cout, d.Ho, d.Wo));
  const Index HoWo = d.Ho * d.Wo;
  for (Index co = 0; co < d.Cout; ++co) {
    const T bias = b.defined() ? b.value()[co] : T(0);
    for (Index n = 0; n < d.N; ++n) {
      const T* src = outmat.data() + co * R + n * HoWo;
      T* dst = y.data() + (n * d.Cout + co) * HoWo;
      for (Index i = 0; i < HoWo; ++i) dst[i] = src[i] + bias;
    }
  }

  std::vector<Var<T>> parents = b.defined() ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  Tensor<T> xv = x.value(), wv = w.value();
  return Var<T>::make_op(y, parents, [x, w, b, xv, wv, d, R, K2, HoWo](const Tensor<T>& g) {
    // Gather the incoming gradient into the (Cout, R) layout.
    std::vector<T>& gout = detail::scratch<T>(1, static_cast<std::size_t>(d.Cout * R));
    for (Index co = 0; co < d.Cout; ++co)
      for (Index n = 0; n < d.N; ++n)
        std::memcpy(gout.data() + co * R + n * HoWo, g.data() + (n * d.Cout + co) * HoWo,
                    static_cast<std::size_t>(HoWo) * sizeof(T));
    if (b.defined() && b.requires_grad()) {
      Tensor<T> gb(Shape::vec(d.Cout));
      for (Index co = 0; co < d.Cout; ++co) {
        T acc = T(0);
        const T* src = gout.data() + co * R;
        for (Index r = 0; r < R; ++r) acc += src[r];
        gb[co] = acc;
      }
      b.accum_grad(gb);
    }
    if (w.requires_grad()) {
      std::vector<T>& col = detail::im2col(xv, d);
      Tensor<T> gw(wv.shape());
      // dW (Cout, K2) = gout (Cout, R) * col (K2, R)^T
      gemm_nt(gout.data(), col.data(), gw.data(), d.Cout, R, K2);
      w.accum_grad(gw);
    }
    if (x.requires_grad()) {
      std::vector<T>& dcol = detail::scratch<T>(2, static_cast<std::size_t>(R * K2));
      // dcol (K2, R) = W (Cout, K2)^T * gout (Cout, R)
      gemm_tn(wv.data(), gout.data(), dcol.data(), K2, d.Cout, R);
      Tensor<T> gx(xv.shape());
      detail::col2im_add(dcol, d, gx);
      x.accum_grad(gx);
    }
  });
}

/// Nearest-neighbor 2x upsampling.
template <typename T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  require(x.shape().rank() == 4, "upsample_nearest2x expects NCHW");
  const Index N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  Tensor<T> y(Shape::nchw(N, C, 2 * H, 2 * W));
  for (Index nc = 0; nc < N * C; ++nc) {
    const T* src = x.value().data() + nc * H * W;
    T* dst = y.data() + nc * 4 * H * W;
    for (Index i = 0; i < H; ++i)
      for (Index j = 0; j < W; ++j) {
        const T v = src[i * W + j];
        dst[(2 * i) * 2 * W + 2 * j] = v;
        dst[(2 * i) * 2 * W + 2 * j + 1] = v;
        dst[(2 * i + 1) * 2 * W + 2 * j] = v;
        dst[(2 * i + 1) * 2 * W + 2 * j + 1] = v;
      }
  }
  Shape orig = x.shape();
  return Var<T>::make_op(y, {x}, [x, orig, N, C, H, W](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index nc = 0; nc < N * C; ++nc) {
      const T* src = g.data() + nc * 4 * H * W;
      T* dst = gx.data() + nc * H * W;
      for (Index i = 0; i < H; ++i)
        for (Index j = 0; j < W; ++j)
          dst[i * W + j] = src[(2 * i) * 2 * W + 2 * j] + src[(2 * i) * 2 * W + 2 * j + 1] +
                           src[(2 * i + 1) * 2 * W + 2 * j] + src[(2 * i + 1) * 2 * W + 2 * j + 1];
    }
    x.accum_grad(gx);
  });
}

/// Max pooling with square window, stride = window.
template <typename T>
Var<T> maxpool2d(const Var<T>& x, int k) {
  require(x.shape().rank() == 4, "maxpool2d expects NCHW");
  const Index N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const Index Ho = H / k, Wo = W / k;
  require(Ho >= 1 && Wo >= 1, "maxpool2d: window ", k, " larger than input ", x.shape().str());
  Tensor<T> y(Shape::nchw(N, C, Ho, Wo));
  std::vector<Index> arg(static_cast<std::size_t>(N * C * Ho * Wo));
  for (Index nc = 0; nc < N * C; ++nc) {
    const T* src = x.value().data() + nc * H * W;
    for (Index oy = 0; oy < Ho; ++oy)
      for (Index ox = 0; ox < Wo; ++ox) {
        Index best = (oy * k) * W + ox * k;
        for (Index dy = 0; dy < k; ++dy)
          for (Index dx = 0; dx < k; ++dx) {
            const Index idx = (oy * k + dy) * W + ox * k + dx;
            if (src[idx] > src[best]) best = idx;
          }
        y[(nc * Ho + oy) * Wo + ox] = src[best];
        arg[static_cast<std::size_t>((nc * Ho + oy) * Wo + ox)] = best;
      }
  }
  Shape orig = x.shape();
  return Var<T>::make_op(y, {x}, [x, orig, arg, N, C, H, W, Ho, Wo](const Tensor<T>& g) {
    Tensor<T> gx(orig);
    for (Index nc = 0; nc < N * C; ++nc)
      for (Index o = 0; o < Ho * Wo; ++o)
        gx[nc * H * W + arg[static_cast<std::size_t>(nc * Ho * Wo + o)]] += g[nc * Ho * Wo + o];
    x.accum_grad(gx);
  });
}

/// Correlation of every channel with one fixed (non-trainable) kernel, valid
/// padding. Used by the SSIM window; gradients flow to the input only.
template <typename T>
Var<T> depthwise_fixed_conv(const Var<T>& x, const Tensor<T>& kernel) {
  require(x.shape().rank() == 4 && kernel.shape().rank() == 2, "depthwise_fixed_conv shapes");
  const Index N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const Index kh = kernel.shape()[0], kw = kernel.shape()[1];
  require(H >= kh && W >= kw, "depthwise_fixed_conv: frame ", x.shape().str(),
          " smaller than window ", kernel.shape().str());
  const Index Ho = H - kh + 1, Wo = W - kw + 1;
  Tensor<T> y(Shape::nchw(N, C, Ho, Wo));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (Index nc = 0; nc < N * C; ++nc) {
    const T* src = x.value().data() + nc * H * W;
    T* dst = y.data() + nc * Ho * Wo;
    for (Index oy = 0; oy < Ho; ++oy)
      for (Index ox = 0; ox < Wo; ++ox) {
        T acc = T(0);
        for (Index ky = 0; ky < kh; ++ky)
          for (Index kx = 0; kx < kw; ++kx)
            acc += kernel[ky * kw + kx] * src[(oy + ky) * W + ox + kx];
        dst[oy * Wo + ox] = acc;
      }
  }
  Shape orig = x.shape();
  return Var<T>::make_op(y, {x}, [x, orig, kernel, N, C, H, W, kh, kw, Ho, Wo](const Tensor<T>& g) {
    Tensor<T> gx(orig);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (Index nc = 0; nc < N * C; ++nc) {
      const T* gsrc = g.data() + nc * Ho * Wo;
      T* dst = gx.data() + nc * H * W;
      for (Index oy = 0; oy < Ho; ++oy)
        for (Index ox = 0; ox < Wo; ++ox) {
          const T gv = gsrc[oy * Wo + ox];
          for (Index ky = 0; ky < kh; ++ky)
            for (Index kx = 0; kx < kw; ++kx)
              dst[(oy + ky) * W + ox + kx] += gv * kernel[ky * kw + kx];
        }
    }
    x.accum_grad(gx);
  });
}

}  // namespace xvad
