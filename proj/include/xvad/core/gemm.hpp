#pragma once

#include <Eigen/Core>

#include <vector>

#include "xvad/core/shape.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xvad {

// Row-major products are evaluated through col-major maps of the same
// buffers (X row-major (m,n) is X^T col-major (n,m)). Eigen itself runs
// single-threaded: its internal threading collapses on the thin/tall shapes
// convolution produces. Large products are split over the big free dimension
// (or the reduction dimension, with partial sums) across OpenMP threads.

namespace detail {
template <typename T>
using CmMapC = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>;
template <typename T>
using CmMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>;

inline void pin_eigen_threads() {
  [[maybe_unused]] static const bool once = [] {
    Eigen::setNbThreads(1);
    return true;
  }();
}

inline int gemm_threads(double flops) {
#ifdef _OPENMP
  if (flops < 4e6 || omp_in_parallel()) return 1;
  return omp_get_max_threads();
#else
  (void)flops;
  return 1;
#endif
}
}  // namespace detail

/// C(M,N) = A(M,K) * B(K,N), all row-major.
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, Index M, Index K, Index N) {
  detail::pin_eigen_threads();
  detail::CmMap<T> cmC(C, N, M);
  detail::CmMapC<T> cmB(B, N, K);
  detail::CmMapC<T> cmA(A, K, M);
  const int nt = detail::gemm_threads(2.0 * M * K * N);
  if (nt > 1 && N >= nt) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int t = 0; t < nt; ++t) {
      const Index lo = N * t / nt, hi = N * (t + 1) / nt;
      if (hi > lo)
        cmC.middleRows(lo, hi - lo).noalias() = cmB.middleRows(lo, hi - lo) * cmA;
    }
    return;
  }
  cmC.noalias() = cmB * cmA;
}

/// C(M,N) = A(M,K) * B(N,K)^T, all row-major. Splits the reduction dimension
/// with per-thread partial sums when it dominates.
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, Index M, Index K, Index N) {
  detail::pin_eigen_threads();
  detail::CmMap<T> cmC(C, N, M);
  detail::CmMapC<T> cmB(B, K, N);
  detail::CmMapC<T> cmA(A, K, M);
  const int nt = detail::gemm_threads(2.0 * M * K * N);
  if (nt > 1 && K >= 2 * static_cast<Index>(nt) && K > 4 * std::max(M, N)) {
#ifdef _OPENMP
    std::vector<std::vector<T>> partial(static_cast<std::size_t>(nt - 1));
#pragma omp parallel for schedule(static)
    for (int t = 0; t < nt; ++t) {
      const Index lo = K * t / nt, hi = K * (t + 1) / nt;
      if (hi <= lo) continue;
      if (t == 0) {
        cmC.noalias() = cmB.middleRows(lo, hi - lo).transpose() * cmA.middleRows(lo, hi - lo);
      } else {
        auto& buf = partial[static_cast<std::size_t>(t - 1)];
        buf.assign(static_cast<std::size_t>(N * M), T(0));
        detail::CmMap<T>(buf.data(), N, M).noalias() =
            cmB.middleRows(lo, hi - lo).transpose() * cmA.middleRows(lo, hi - lo);
      }
    }
    for (auto& buf : partial)
      if (!buf.empty()) cmC += detail::CmMapC<T>(buf.data(), N, M);
    return;
#endif
  }
  if (nt > 1 && N >= nt) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int t = 0; t < nt; ++t) {
      const Index lo = N * t / nt, hi = N * (t + 1) / nt;
      if (hi > lo)
        cmC.middleRows(lo, hi - lo).noalias() =
            cmB.middleCols(lo, hi - lo).transpose() * cmA;
    }
    return;
  }
  cmC.noalias() = cmB.transpose() * cmA;
}

/// C(K,N) = A(M,K)^T * B(M,N), all row-major.
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, Index K, Index M, Index N) {
  detail::pin_eigen_threads();
  detail::CmMap<T> cmC(C, N, K);
  detail::CmMapC<T> cmB(B, N, M);
  detail::CmMapC<T> cmA(A, K, M);
  const int nt = detail::gemm_threads(2.0 * M * K * N);
  if (nt > 1 && N >= nt) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int t = 0; t < nt; ++t) {
      const Index lo = N * t / nt, hi = N * (t + 1) / nt;
      if (hi > lo)
        cmC.middleRows(lo, hi - lo).noalias() = cmB.middleRows(lo, hi - lo) * cmA.transpose();
    }
    return;
  }
  cmC.noalias() = cmB * cmA.transpose();
}

}  // namespace xvad
