#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "xvad/core/tensor.hpp"

namespace xvad {

/// Peak signal-to-noise ratio in dB for frames in [0, 1] (peak 1.0), capped
/// at 100 dB when the MSE vanishes.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "psnr: shape ", a.shape().str(), " vs ", b.shape().str());
  double mse = 0.0;
  const Index n = a.numel();
  for (Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

/// Min-max normalizes a per-video PSNR series to [0, 1] and flips it into an
/// anomaly score (1 - normalized) unless `invert` is false. A constant series
/// maps to all zeros.
inline std::vector<double> normalize_and_score(const std::vector<double>& psnr_series,
                                               bool invert = true) {
  require(!psnr_series.empty(), "normalize_and_score: empty series");
  const auto [lo_it, hi_it] = std::minmax_element(psnr_series.begin(), psnr_series.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(psnr_series.size(), 0.0);
  if (hi - lo <= 0.0) return out;
  for (std::size_t i = 0; i < psnr_series.size(); ++i) {
    const double s = (psnr_series[i] - lo) / (hi - lo);
    out[i] = invert ? 1.0 - s : s;
  }
  return out;
}

/// Frame-level ROC-AUC via the rank statistic (ties get half credit):
/// equals P(score_pos > score_neg) + 1/2 P(tie).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "roc_auc: ", scores.size(), " scores vs ",
          labels.size(), " labels");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) {
    require(l == 0 || l == 1, "roc_auc: labels must be 0/1");
    (l ? pos : neg)++;
  }
  require(pos > 0 && neg > 0, "roc_auc undefined: only one class present (", pos, " positive, ",
          neg, " negative)");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tie groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double pos_d = static_cast<double>(pos), neg_d = static_cast<double>(neg);
  return (rank_sum_pos - pos_d * (pos_d + 1.0) / 2.0) / (pos_d * neg_d);
}

}  // namespace xvad
