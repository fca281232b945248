#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "xvad/aug/augment.hpp"
#include "xvad/loss/weights.hpp"
#include "xvad/model/critic.hpp"
#include "xvad/model/generator.hpp"

namespace xvad {

/// Flat key-value training configuration. Every key has a typed default (the
/// reference hyperparameters); unknown keys, type errors and range errors are
/// collected and reported together. dump() emits the resolved values in a
/// canonical order, which also feeds the config hash stored in checkpoints.
struct TrainConfig {
  // Run
  std::uint64_t seed = 1;
  bool deterministic = true;

  // Data
  std::string train_data;  // frame-directory root or manifest JSON
  std::string donor_data;  // optional; empty -> donors drawn from clip inputs
  long long image_size = 256;
  long long t_frames = 4;

  // Schedule
  long long batch_size = 8;
  long long iterations = 5000;
  long long checkpoint_every = 500;
  long long log_every = 1;

  // Optimizers
  double lr_g = 0.0002;
  double lr_d = 0.00002;
  double lr_n = 0.00002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;

  // Objective weights
  double alpha_mem = 0.0025;
  double alpha_d = 0.05;
  double alpha_n = 0.5;
  double w_n = 1.0;
  double w_rn = 0.01;
  double w_aa = 1.0;
  double w_raa = 1.0;
  double arcface_s = 64.0;
  double arcface_margin_deg = 28.6;

  // Networks
  std::string gen_widths = "64,128,256,512";
  std::string critic_widths = "64,128,256,512";
  long long memory_items = 2000;
  double memory_lambda = 0.0005;
  bool memory_per_location = true;
  bool critic_sigmoid = false;
  bool critic_instance_norm = true;
  long long ssim_window = 11;

  // Anomaly synthesis
  std::string extractor = "rand_resnet50";
  double scda_threshold = 0.1;
  long long paste_max_retries = 16;

  // Augmentation g(.)
  double jitter_brightness = 0.1;
  double jitter_contrast = 0.1;
  double jitter_saturation = 0.1;
  double jitter_hue = 0.1;
  double affine_degrees = 360.0;
  double perspective_distortion = 0.2;
  double augment_p = 1.0;

  // Scoring
  bool score_invert = true;  // anomaly = 1 - normalized PSNR

  // -- registry ------------------------------------------------------------

  struct Entry {
    const char* key;
    std::variant<std::uint64_t TrainConfig::*, bool TrainConfig::*, long long TrainConfig::*,
                 double TrainConfig::*, std::string TrainConfig::*>
        member;
  };

  static const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = {
        {"seed", &TrainConfig::seed},
        {"deterministic", &TrainConfig::deterministic},
        {"train_data", &TrainConfig::train_data},
        {"donor_data", &TrainConfig::donor_data},
        {"image_size", &TrainConfig::image_size},
        {"t_frames", &TrainConfig::t_frames},
        {"batch_size", &TrainConfig::batch_size},
        {"iterations", &TrainConfig::iterations},
        {"checkpoint_every", &TrainConfig::checkpoint_every},
        {"log_every", &TrainConfig::log_every},
        {"lr_g", &TrainConfig::lr_g},
        {"lr_d", &TrainConfig::lr_d},
        {"lr_n", &TrainConfig::lr_n},
        {"adam_beta1", &TrainConfig::adam_beta1},
        {"adam_beta2", &TrainConfig::adam_beta2},
        {"alpha_mem", &TrainConfig::alpha_mem},
        {"alpha_d", &TrainConfig::alpha_d},
        {"alpha_n", &TrainConfig::alpha_n},
        {"w_n", &TrainConfig::w_n},
        {"w_rn", &TrainConfig::w_rn},
        {"w_aa", &TrainConfig::w_aa},
        {"w_raa", &TrainConfig::w_raa},
        {"arcface_s", &TrainConfig::arcface_s},
        {"arcface_margin_deg", &TrainConfig::arcface_margin_deg},
        {"gen_widths", &TrainConfig::gen_widths},
        {"critic_widths", &TrainConfig::critic_widths},
        {"memory_items", &TrainConfig::memory_items},
        {"memory_lambda", &TrainConfig::memory_lambda},
        {"memory_per_location", &TrainConfig::memory_per_location},
        {"critic_sigmoid", &TrainConfig::critic_sigmoid},
        {"critic_instance_norm", &TrainConfig::critic_instance_norm},
        {"ssim_window", &TrainConfig::ssim_window},
        {"extractor", &TrainConfig::extractor},
        {"scda_threshold", &TrainConfig::scda_threshold},
        {"paste_max_retries", &TrainConfig::paste_max_retries},
        {"jitter_brightness", &TrainConfig::jitter_brightness},
        {"jitter_contrast", &TrainConfig::jitter_contrast},
        {"jitter_saturation", &TrainConfig::jitter_saturation},
        {"jitter_hue", &TrainConfig::jitter_hue},
        {"affine_degrees", &TrainConfig::affine_degrees},
        {"perspective_distortion", &TrainConfig::perspective_distortion},
        {"augment_p", &TrainConfig::augment_p},
        {"score_invert", &TrainConfig::score_invert},
    };
    return entries;
  }

  static TrainConfig from_string(const std::string& text) {
    TrainConfig cfg;
    std::vector<std::string> problems;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash_pos = line.find('#');
      if (hash_pos != std::string::npos) line.erase(hash_pos);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        problems.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
        continue;
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const Entry* entry = nullptr;
      for (const auto& e : registry())
        if (key == e.key) entry = &e;
      if (!entry) {
        problems.push_back("unknown key '" + key + "'");
        continue;
      }
      cfg.assign(*entry, value, problems);
    }
    cfg.validate(problems);
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
    return cfg;
  }

  static TrainConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require<ConfigError>(in.good(), "cannot open config file '", path.string(), "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
  }

  std::string dump() const {
    std::ostringstream out;
    out.precision(17);
    for (const auto& e : registry()) {
      out << e.key << " = ";
      std::visit(
          [&](auto member) {
            using M = std::decay_t<decltype(this->*member)>;
            if constexpr (std::is_same_v<M, bool>) out << ((this->*member) ? "true" : "false");
            else out << (this->*member);
          },
          e.member);
      out << "\n";
    }
    return out.str();
  }

  /// Hash over every key that affects what a given iteration computes.
  /// Pure schedule knobs (total iterations, checkpoint/log cadence) stay out,
  /// so a checkpoint can be resumed with a longer schedule.
  std::uint64_t hash() const {
    std::istringstream in(dump());
    std::string line;
    std::uint64_t h = 1469598103934665603ULL;
    while (std::getline(in, line)) {
      if (line.rfind("iterations ", 0) == 0 || line.rfind("checkpoint_every ", 0) == 0 ||
          line.rfind("log_every ", 0) == 0)
        continue;
      for (unsigned char c : line) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= '\n';
      h *= 1099511628211ULL;
    }
    return h;
  }

  std::vector<Index> parse_widths(const std::string& csv, const char* key,
                                  std::vector<std::string>* problems = nullptr) const {
    std::vector<Index> widths;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        const long long v = std::stoll(tok);
        if (v < 1) throw std::invalid_argument("");
        widths.push_back(v);
      } catch (...) {
        if (problems)
          problems->push_back(std::string(key) + ": '" + tok + "' is not a positive integer");
        else
          throw ConfigError(std::string(key) + ": '" + tok + "' is not a positive integer");
      }
    }
    return widths;
  }

  GeneratorConfig generator_config() const {
    GeneratorConfig g;
    g.input_frames = t_frames;
    g.widths = parse_widths(gen_widths, "gen_widths");
    g.memory_items = memory_items;
    g.memory_lambda = memory_lambda;
    g.memory_per_location = memory_per_location;
    return g;
  }

  CriticConfig critic_config() const {
    CriticConfig c;
    c.widths = parse_widths(critic_widths, "critic_widths");
    c.sigmoid_output = critic_sigmoid;
    c.use_instance_norm = critic_instance_norm;
    return c;
  }

  LossWeights loss_weights() const {
    LossWeights w;
    w.alpha_mem = alpha_mem;
    w.alpha_d = alpha_d;
    w.alpha_n = alpha_n;
    w.w_n = w_n;
    w.w_rn = w_rn;
    w.w_aa = w_aa;
    w.w_raa = w_raa;
    w.arcface_s = arcface_s;
    w.arcface_margin_deg = arcface_margin_deg;
    return w;
  }

  AugmentConfig augment_config() const {
    AugmentConfig a;
    a.brightness = jitter_brightness;
    a.contrast = jitter_contrast;
    a.saturation = jitter_saturation;
    a.hue = jitter_hue;
    a.affine_degrees = affine_degrees;
    a.perspective_distortion = perspective_distortion;
    a.p = augment_p;
    return a;
  }

 private:
  void assign(const Entry& entry, const std::string& value, std::vector<std::string>& problems) {
    std::visit(
        [&](auto member) {
          using M = std::decay_t<decltype(this->*member)>;
          try {
            if constexpr (std::is_same_v<M, bool>) {
              if (value == "true" || value == "1") this->*member = true;
              else if (value == "false" || value == "0") this->*member = false;
              else throw std::invalid_argument("");
            } else if constexpr (std::is_same_v<M, std::uint64_t>) {
              this->*member = std::stoull(value);
            } else if constexpr (std::is_same_v<M, long long>) {
              this->*member = std::stoll(value);
            } else if constexpr (std::is_same_v<M, double>) {
              this->*member = std::stod(value);
            } else {
              this->*member = value;
            }
          } catch (...) {
            problems.push_back(std::string(entry.key) + ": cannot parse '" + value + "'");
          }
        },
        entry.member);
  }

  void validate(std::vector<std::string>& problems) const {
    auto check = [&](bool ok, const std::string& msg) {
      if (!ok) problems.push_back(msg);
    };
    check(image_size >= 8, "image_size must be >= 8");
    check(t_frames >= 1, "t_frames must be >= 1");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(iterations >= 1, "iterations must be >= 1");
    check(checkpoint_every >= 1, "checkpoint_every must be >= 1");
    check(log_every >= 1, "log_every must be >= 1");
    check(lr_g > 0 && lr_d > 0 && lr_n > 0, "learning rates must be positive");
    check(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1 must be in [0,1)");
    check(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2 must be in [0,1)");
    check(alpha_mem >= 0 && alpha_d >= 0 && alpha_n >= 0 && w_n >= 0 && w_rn >= 0 && w_aa >= 0 &&
              w_raa >= 0,
          "loss weights must be nonnegative");
    check(arcface_s > 0, "arcface_s must be positive");
    check(arcface_margin_deg >= 0 && arcface_margin_deg < 90, "arcface_margin_deg must be in [0,90)");
    check(memory_items >= 1, "memory_items must be >= 1");
    check(memory_lambda >= 0, "memory_lambda must be nonnegative");
    check(ssim_window >= 3 && ssim_window % 2 == 1, "ssim_window must be an odd number >= 3");
    check(extractor == "rand_resnet50" || extractor == "rand_tiny",
          "extractor must be rand_resnet50 or rand_tiny");
    check(scda_threshold >= 0 && scda_threshold <= 1, "scda_threshold must be in [0,1]");
    check(paste_max_retries >= 0, "paste_max_retries must be nonnegative");
    check(jitter_brightness >= 0 && jitter_contrast >= 0 && jitter_saturation >= 0,
          "jitter magnitudes must be nonnegative");
    check(jitter_hue >= 0 && jitter_hue <= 0.5, "jitter_hue must be in [0,0.5]");
    check(affine_degrees >= 0, "affine_degrees must be nonnegative");
    check(perspective_distortion >= 0 && perspective_distortion <= 1,
          "perspective_distortion must be in [0,1]");
    check(augment_p >= 0 && augment_p <= 1, "augment_p must be in [0,1]");

    std::vector<std::string> width_problems;
    auto gw = parse_widths(gen_widths, "gen_widths", &width_problems);
    auto cw = parse_widths(critic_widths, "critic_widths", &width_problems);
    for (auto& p : width_problems) problems.push_back(p);
    check(gw.size() >= 2, "gen_widths needs at least two comma-separated widths");
    check(cw.size() >= 2, "critic_widths needs at least two comma-separated widths");
    if (gw.size() >= 2)
      check(image_size % (1LL << (gw.size() - 1)) == 0,
            "image_size must be divisible by the generator downsampling factor");
  }
};

}  // namespace xvad
