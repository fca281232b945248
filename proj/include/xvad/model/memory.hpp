#pragma once

#include <cmath>

#include "xvad/core/ops.hpp"
#include "xvad/core/random.hpp"

namespace xvad {

/// Bank of K prototype vectors in R^Q addressed by cosine-similarity softmax
/// with hard shrinkage (factor lambda) and L1 re-normalization.
template <typename T>
class MemoryBank {
 public:
  MemoryBank() = default;

  MemoryBank(Index items, Index dim, Rng& rng, T shrink_lambda = T(0.0005))
      : lambda_(shrink_lambda) {
    Tensor<T> m(Shape::mat(items, dim));
    const double std = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Index i = 0; i < m.numel(); ++i) m[i] = static_cast<T>(rng.normal(0.0, std));
    items_ = Var<T>(m, true);
  }

  Index size() const { return items_.shape()[0]; }
  Index dim() const { return items_.shape()[1]; }
  T shrink_lambda() const { return lambda_; }
  Var<T>& items() { return items_; }
  const Var<T>& items() const { return items_; }

 private:
  Var<T> items_;
  T lambda_ = T(0.0005);
};

template <typename T>
struct MemoryAddress {
  Var<T> output;   // same layout as the query
  Var<T> weights;  // (R, K) post-shrinkage addressing rows, each summing to 1
  bool shrink_fallback = false;
};

/// Addresses each row of `z_rows` (R x Q) against the bank:
///   w   = softmax_i cos(z, m_i)
///   h_i = max(w_i - lambda, 0) * w_i / (|w_i - lambda| + eps)
///   w^  = h / ||h||_1          (rows where h == 0 fall back to w, flagged)
///   z^  = w^ M
template <typename T>
MemoryAddress<T> memory_address_rows(const Var<T>& z_rows, const MemoryBank<T>& bank,
                                     T eps = T(1e-12)) {
  require(z_rows.shape().rank() == 2 && z_rows.shape()[1] == bank.dim(), "memory_address: query ",
          z_rows.shape().str(), " vs bank dim ", bank.dim());
  require<NumericError>(z_rows.value().all_finite(), "memory_address: non-finite query");
  {
    const Tensor<T>& m = bank.items().value();
    for (Index k = 0; k < bank.size(); ++k) {
      T norm2 = T(0);
      for (Index q = 0; q < bank.dim(); ++q) norm2 += m[k * bank.dim() + q] * m[k * bank.dim() + q];
      require(norm2 > T(0), "memory_address: memory item ", k, " is the zero vector");
    }
  }
  const Index R = z_rows.shape()[0], K = bank.size();
  Var<T> cosine = matmul(rows_l2_normalize(z_rows), transpose(rows_l2_normalize(bank.items())));
  Var<T> soft = softmax_rows(cosine);
  Var<T> shifted = add_scalar(soft, -bank.shrink_lambda());
  Var<T> shrunk = div(mul(relu(shifted), soft), add_scalar(abs(shifted), eps));

  Var<T> row_mass = rows_sum(shrunk);
  // Rows whose weights all shrank to zero keep their un-shrunk softmax row.
  Tensor<T> fallback_rows(Shape::mat(R, 1));
  bool any_fallback = false;
  for (Index r = 0; r < R; ++r)
    if (row_mass.value()[r] <= T(0)) {
      fallback_rows[r] = T(1);
      any_fallback = true;
    }
  MemoryAddress<T> out;
  out.shrink_fallback = any_fallback;
  if (any_fallback) {
    Tensor<T> keep_mask(Shape::mat(R, K)), fall_mask(Shape::mat(R, K));
    for (Index r = 0; r < R; ++r)
      for (Index k = 0; k < K; ++k) {
        fall_mask[r * K + k] = fallback_rows[r];
        keep_mask[r * K + k] = T(1) - fallback_rows[r];
      }
    Var<T> safe_mass = add(row_mass, Var<T>(fallback_rows, false));
    Var<T> normalized = div_rowwise(shrunk, safe_mass);
    out.weights = add(mul(Var<T>(keep_mask, false), normalized),
                      mul(Var<T>(fall_mask, false), soft));
  } else {
    out.weights = div_rowwise(shrunk, row_mass);
  }
  out.output = matmul(out.weights, bank.items());
  return out;
}

/// Convenience overload for a single query vector of dimension Q.
template <typename T>
MemoryAddress<T> memory_address(const Var<T>& z, const MemoryBank<T>& bank, T eps = T(1e-12)) {
  require(z.shape().rank() == 1, "memory_address vector overload expects rank-1 query");
  MemoryAddress<T> rows = memory_address_rows(reshape(z, Shape::mat(1, z.shape()[0])), bank, eps);
  rows.output = reshape(rows.output, Shape::vec(bank.dim()));
  return rows;
}

}  // namespace xvad
