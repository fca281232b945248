#pragma once

namespace xvad {

/// Objective weights and margin settings. Defaults are the reference values
/// used throughout: alpha_mem 0.0025, alpha_d 0.05, alpha_n 0.5, classifier
/// term weights (1, 0.01, 1, 1), angular-margin scale 64 and margin 28.6 deg.
struct LossWeights {
  double alpha_mem = 0.0025;
  double alpha_d = 0.05;
  double alpha_n = 0.5;
  double w_n = 1.0;
  double w_rn = 0.01;
  double w_aa = 1.0;
  double w_raa = 1.0;
  double arcface_s = 64.0;
  double arcface_margin_deg = 28.6;

  double arcface_margin_rad() const { return arcface_margin_deg * 3.14159265358979323846 / 180.0; }
};

}  // namespace xvad
