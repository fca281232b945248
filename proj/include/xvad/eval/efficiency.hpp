#pragma once

#include <chrono>

#include "xvad/model/generator.hpp"

namespace xvad {

struct EfficiencyReport {
  double parameters_millions = 0.0;
  double gmacs = 0.0;  // analytic, one forward pass at the given input size
  double fps = 0.0;    // measured on this host; 0 when timing was skipped
};

/// Multiply-accumulates of one convolution: k^2 * C_in * C_out * H_out * W_out.
inline long long conv_macs(long long k, long long cin, long long cout, long long h_out,
                           long long w_out) {
  return k * k * cin * cout * h_out * w_out;
}

/// Analytic MAC count of one generator forward pass. Convolutions follow the
/// closed-form layer formula; memory addressing contributes its two matrix
/// products (similarities and the weighted read), 2*K*Q per query.
inline long long generator_macs(const GeneratorConfig& cfg, Index image_size) {
  long long total = 0;
  Index size = image_size;
  Index cin = cfg.input_frames * cfg.channels;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    if (i > 0) size /= 2;
    total += conv_macs(3, cin, cfg.widths[i], size, size);
    total += conv_macs(3, cfg.widths[i], cfg.widths[i], size, size);
    cin = cfg.widths[i];
  }
  const long long queries = cfg.memory_per_location ? size * size : 1;
  total += 2LL * queries * cfg.memory_items * cfg.widths.back();
  for (std::size_t i = cfg.widths.size() - 1; i >= 1; --i) {
    size *= 2;
    total += conv_macs(3, cfg.widths[i], cfg.widths[i - 1], size, size);
    total += conv_macs(3, 2 * cfg.widths[i - 1], cfg.widths[i - 1], size, size);
  }
  total += conv_macs(3, cfg.widths[0], cfg.channels, size, size);
  return total;
}

/// Exact trainable parameter count of the inference path (generator plus
/// memory bank).
template <typename T>
long long generator_parameter_count(Generator<T>& gen) {
  long long total = 0;
  for (auto& [name, var] : gen.parameters()) total += var.value().numel();
  return total;
}

/// Parameter count straight from a configuration, without building the model.
inline long long generator_parameter_count(const GeneratorConfig& cfg) {
  long long total = 0;
  Index cin = cfg.input_frames * cfg.channels;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    total += 9LL * cin * cfg.widths[i] + cfg.widths[i];
    total += 9LL * cfg.widths[i] * cfg.widths[i] + cfg.widths[i];
    cin = cfg.widths[i];
  }
  total += static_cast<long long>(cfg.memory_items) * cfg.widths.back();
  for (std::size_t i = cfg.widths.size() - 1; i >= 1; --i) {
    total += 9LL * cfg.widths[i] * cfg.widths[i - 1] + cfg.widths[i - 1];
    total += 9LL * 2 * cfg.widths[i - 1] * cfg.widths[i - 1] + cfg.widths[i - 1];
  }
  total += 9LL * cfg.widths[0] * cfg.channels + cfg.channels;
  return total;
}

/// Assembles the report; `timing_runs` > 0 measures FPS over that many single
/// frame forwards after a small warm-up.
template <typename T>
EfficiencyReport efficiency_report(Generator<T>& gen, Index image_size, int timing_runs = 100) {
  EfficiencyReport report;
  report.parameters_millions = static_cast<double>(generator_parameter_count(gen)) / 1e6;
  report.gmacs = static_cast<double>(generator_macs(gen.config(), image_size)) / 1e9;
  if (timing_runs > 0) {
    NoGradGuard no_grad;
    const Index in_ch = gen.config().input_frames * gen.config().channels;
    Rng rng(7);
    Tensor<T> x(Shape::nchw(1, in_ch, image_size, image_size));
    for (Index i = 0; i < x.numel(); ++i) x[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
    Var<T> leaf(x);
    for (int i = 0; i < 3; ++i) gen.forward(leaf);  // warm-up
    const auto begin = std::chrono::steady_clock::now();
    for (int i = 0; i < timing_runs; ++i) gen.forward(leaf);
    const auto end = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(end - begin).count();
    report.fps = timing_runs / seconds;
  }
  return report;
}

}  // namespace xvad
