#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xvad/aug/augment.hpp"
#include "xvad/data/dataset.hpp"
#include "xvad/loss/compose.hpp"
#include "xvad/loss/losses.hpp"
#include "xvad/model/checkpoint.hpp"
#include "xvad/model/critic.hpp"
#include "xvad/model/generator.hpp"
#include "xvad/nn/adam.hpp"
#include "xvad/synth/paste.hpp"
#include "xvad/train/config.hpp"

namespace xvad {

/// Per-iteration scalar losses, logged as one CSV row.
struct LossReport {
  long long iteration = 0;
  double mse = 0, ssim = 0, grad = 0, mem = 0;
  double n = 0, rn = 0, aa = 0, raa = 0;
  double g_total = 0, d_total = 0, n_total = 0;

  bool all_finite() const {
    for (double v : {mse, ssim, grad, mem, n, rn, aa, raa, g_total, d_total, n_total})
      if (!std::isfinite(v)) return false;
    return true;
  }

  static const char* csv_header() {
    return "iteration,mse,ssim,grad,mem,n,rn,aa,raa,g_total,d_total,n_total";
  }

  std::string csv_row() const {
    std::ostringstream out;
    out.precision(10);
    out << iteration << ',' << mse << ',' << ssim << ',' << grad << ',' << mem << ',' << n << ','
        << rn << ',' << aa << ',' << raa << ',' << g_total << ',' << d_total << ',' << n_total;
    return out.str();
  }

  std::string describe() const {
    std::ostringstream out;
    out << "mse=" << mse << " ssim=" << ssim << " grad=" << grad << " mem=" << mem << " n=" << n
        << " rn=" << rn << " aa=" << aa << " raa=" << raa << " g=" << g_total << " d=" << d_total
        << " n_total=" << n_total;
    return out.str();
  }
};

/// In-memory cache of normalized frames, keyed per (video, frame). Caching
/// stops silently once the byte budget is hit; lookups then decode directly.
class FrameStore {
 public:
  FrameStore() = default;
  FrameStore(const DatasetManifest* manifest, Index image_size,
             std::size_t budget_bytes = std::size_t(1) << 30)
      : manifest_(manifest), size_(image_size), budget_(budget_bytes) {}

  Frame get(Index video, Index frame) {
    const auto key = std::make_pair(video, frame);
    if (auto it = cache_.find(key); it != cache_.end())
      return Frame{it->second, manifest_->videos[static_cast<std::size_t>(video)].video_id, frame};
    Frame f = load_frame(manifest_->videos[static_cast<std::size_t>(video)], frame, size_);
    const std::size_t bytes = static_cast<std::size_t>(f.pixels.numel()) * sizeof(float);
    if (used_ + bytes <= budget_) {
      cache_.emplace(key, f.pixels);
      used_ += bytes;
    }
    return f;
  }

  const DatasetManifest& manifest() const { return *manifest_; }

 private:
  const DatasetManifest* manifest_ = nullptr;
  Index size_ = 0;
  std::size_t budget_ = 0, used_ = 0;
  std::map<std::pair<Index, Index>, Tensor<float>> cache_;
};

/// End-to-end training: per iteration the discriminator, the normalcy
/// classifier, and finally the generator take one Adam step each. Batch
/// sampling, donor choice, paste boxes and augmentation all draw from a
/// per-iteration stream derived from (seed, iteration), so interrupted runs
/// resume bit-exactly from a checkpoint.
class Trainer {
 public:
  using T = float;

  /// Invoked after each optimizer phase of a step ('d', 'n', 'g'); lets
  /// callers audit which parameter group a phase touched.
  std::function<void(char)> phase_hook;

  explicit Trainer(const TrainConfig& cfg)
      : cfg_(TrainConfig::from_string(cfg.dump())),  // re-validates programmatic configs
        weights_(cfg_.loss_weights()),
        extractor_(cfg_.extractor, Rng::mix(cfg_.seed, 0x0e37)) {
    Rng wrng(Rng::mix(cfg_.seed, 0x1a2b));
    gen_ = Generator<T>(cfg_.generator_config(), wrng);
    CriticConfig ccfg = cfg_.critic_config();
    disc_ = PatchCritic<T>(ccfg, wrng, "d");
    cls_ = PatchCritic<T>(ccfg, wrng, "n");

    // Class-centre dimension = flattened classifier attention map.
    {
      NoGradGuard no_grad;
      Tensor<T> probe(Shape::nchw(1, 3, cfg_.image_size, cfg_.image_size));
      const Shape fs = cls_.forward(Var<T>(probe)).features.shape();
      attn_h_ = fs[2];
      attn_w_ = fs[3];
    }
    Tensor<T> centers(Shape::mat(2, attn_h_ * attn_w_));
    for (Index i = 0; i < centers.numel(); ++i) centers[i] = static_cast<T>(wrng.normal());
    for (Index r = 0; r < 2; ++r) {
      T norm = 0;
      for (Index c = 0; c < centers.shape()[1]; ++c) norm += centers.at(r, c) * centers.at(r, c);
      norm = std::sqrt(norm);
      for (Index c = 0; c < centers.shape()[1]; ++c) centers.at(r, c) /= norm;
    }
    centers_ = Var<T>(centers, true);

    adam_g_ = nn::Adam<T>(gen_.parameters(), static_cast<T>(cfg_.lr_g),
                          static_cast<T>(cfg_.adam_beta1), static_cast<T>(cfg_.adam_beta2));
    adam_d_ = nn::Adam<T>(disc_.parameters(), static_cast<T>(cfg_.lr_d),
                          static_cast<T>(cfg_.adam_beta1), static_cast<T>(cfg_.adam_beta2));
    nn::ParamList<T> cls_params = cls_.parameters();
    cls_params.emplace_back("n.arcface_centers", centers_);
    adam_n_ = nn::Adam<T>(cls_params, static_cast<T>(cfg_.lr_n), static_cast<T>(cfg_.adam_beta1),
                          static_cast<T>(cfg_.adam_beta2));

    if (!cfg_.train_data.empty()) attach_data();
  }

  // -- data ----------------------------------------------------------------

  static DatasetManifest resolve_manifest(const std::string& path_or_root, DatasetKind kind) {
    const std::filesystem::path p(path_or_root);
    if (p.extension() == ".json") return load_manifest(p);
    return build_manifest(p, kind);
  }

  void attach_data() {
    train_manifest_ = resolve_manifest(cfg_.train_data, DatasetKind::VadTrain);
    train_store_ = FrameStore(&train_manifest_, cfg_.image_size);
    windows_.clear();
    for (Index v = 0; v < static_cast<Index>(train_manifest_.videos.size()); ++v) {
      const Index count = train_manifest_.videos[static_cast<std::size_t>(v)].frame_count;
      for (Index t = 0; t + cfg_.t_frames < count; ++t) windows_.emplace_back(v, t);
    }
    require<ConfigError>(!windows_.empty(), "training data '", cfg_.train_data,
                         "' yields no clips of length T+1 = ", cfg_.t_frames + 1);
    if (!cfg_.donor_data.empty()) {
      donor_manifest_ = resolve_manifest(cfg_.donor_data, DatasetKind::TaskIrrelevant);
      donor_store_ = FrameStore(&donor_manifest_, cfg_.image_size);
      donor_frames_.clear();
      for (Index v = 0; v < static_cast<Index>(donor_manifest_.videos.size()); ++v)
        for (Index f = 0; f < donor_manifest_.videos[static_cast<std::size_t>(v)].frame_count; ++f)
          donor_frames_.emplace_back(v, f);
      require<ConfigError>(!donor_frames_.empty(), "donor data '", cfg_.donor_data,
                           "' contains no frames");
    }
  }

  // -- one iteration ---------------------------------------------------------

  LossReport step() {
    require<ConfigError>(!windows_.empty(), "no training data attached");
    const Index B = cfg_.batch_size;
    const Index H = cfg_.image_size, W = cfg_.image_size, TF = cfg_.t_frames;
    Rng rng(Rng::mix(cfg_.seed, 0x57e9000 + static_cast<std::uint64_t>(iteration_)));

    // Batch assembly.
    Tensor<T> x(Shape::nchw(B, TF * 3, H, W));
    Tensor<T> target(Shape::nchw(B, 3, H, W));
    std::vector<Clip> clips;
    for (Index b = 0; b < B; ++b) {
      const auto [vid, t0] = windows_[static_cast<std::size_t>(rng.uniform_index(
          static_cast<Index>(windows_.size())))];
      Clip clip;
      for (Index f = 0; f < TF; ++f) clip.inputs.push_back(train_store_.get(vid, t0 + f));
      clip.target = train_store_.get(vid, t0 + TF);
      for (Index f = 0; f < TF; ++f)
        std::copy_n(clip.inputs[static_cast<std::size_t>(f)].pixels.data(), 3 * H * W,
                    x.data() + ((b * TF + f) * 3) * H * W);
      std::copy_n(clip.target.pixels.data(), 3 * H * W, target.data() + b * 3 * H * W);
      clips.push_back(std::move(clip));
    }
    Var<T> x_leaf(x), target_leaf(target);

    // (1) Generator forward (graph kept for the G update).
    auto gen_out = gen_.forward(x_leaf);
    Var<T> v_hat = gen_out.frame;
    Var<T> v_hat_detached = v_hat.detach();

    // (2) Pseudo-anomaly synthesis, one per sample.
    Tensor<T> pseudo(Shape::nchw(B, 3, H, W));
    Tensor<T> mask_small(Shape::nchw(B, 1, attn_h_, attn_w_));
    for (Index b = 0; b < B; ++b) {
      PseudoAnomaly pa = synthesize_for(clips[static_cast<std::size_t>(b)], rng);
      std::copy_n(pa.frame.data(), 3 * H * W, pseudo.data() + b * 3 * H * W);
      Tensor<float> small = resize_nearest(pa.mask, attn_h_, attn_w_);
      std::copy_n(small.data(), attn_h_ * attn_w_, mask_small.data() + b * attn_h_ * attn_w_);
    }
    Var<T> pseudo_leaf(pseudo);

    // Augmented predicted frames g(v_hat) (participate only in the
    // relative-attention term).
    Tensor<T> augmented(Shape::nchw(B, 3, H, W));
    const AugmentConfig acfg = cfg_.augment_config();
    for (Index b = 0; b < B; ++b) {
      Tensor<T> one(Shape{3, H, W});
      std::copy_n(v_hat.value().data() + b * 3 * H * W, 3 * H * W, one.data());
      Tensor<T> out = augment(one, acfg, rng);
      std::copy_n(out.data(), 3 * H * W, augmented.data() + b * 3 * H * W);
    }
    Var<T> augmented_leaf(augmented);

    LossReport report;
    report.iteration = iteration_;
    const LossWeights& lw = weights_;

    // (3) Discriminator step on detached fakes vs real targets.
    {
      adam_d_.zero_grad();
      Var<T> both = concat_batch<T>({v_hat_detached, target_leaf});
      Var<T> scores = critic_score(disc_.logit_map(both));
      loss::ObjectiveTerms<Var<T>> terms = zero_terms();
      terms.adv_disc =
          loss::adv_discriminator_term(slice_batch(scores, 0, B), slice_batch(scores, B, B));
      Var<T> l_d = loss::compose_objectives(terms, lw).discriminator;
      l_d.backward();
      adam_d_.step();
      report.d_total = l_d.value().item();
      if (phase_hook) phase_hook('d');
    }

    // (4) Normalcy classifier step: scores and attentions of
    // [v_hat (detached), v_tilde, g(v_hat)].
    {
      adam_n_.zero_grad();
      Var<T> all = concat_batch<T>({v_hat_detached, pseudo_leaf, augmented_leaf});
      auto out = cls_.forward(all);
      Var<T> scores = critic_score(out.logit_map);
      Var<T> attn = extract_attention(out.features);
      Var<T> n_hat = slice_batch(scores, 0, B);
      Var<T> n_tilde = slice_batch(scores, B, B);
      Var<T> a_hat = slice_batch(attn, 0, B);
      Var<T> a_tilde = slice_batch(attn, B, B);
      Var<T> attn_rows = reshape(attn, Shape::mat(3 * B, attn_h_ * attn_w_));
      std::vector<int> labels(static_cast<std::size_t>(3 * B), 1);
      for (Index b = 0; b < B; ++b) labels[static_cast<std::size_t>(B + b)] = 0;

      loss::ObjectiveTerms<Var<T>> terms = zero_terms();
      terms.n = loss::normalcy(n_hat, n_tilde);
      terms.rn = loss::relative_normalcy(n_hat, n_tilde);
      terms.aa = loss::attention_affirmation(a_hat, a_tilde, Var<T>(mask_small));
      terms.raa = loss::relative_attention(attn_rows, labels, centers_,
                                           static_cast<T>(lw.arcface_s),
                                           static_cast<T>(lw.arcface_margin_rad()));
      Var<T> l_n = loss::compose_objectives(terms, lw).classifier;
      l_n.backward();
      adam_n_.step();
      report.n = terms.n.value().item();
      report.rn = terms.rn.value().item();
      report.aa = terms.aa.value().item();
      report.raa = terms.raa.value().item();
      report.n_total = l_n.value().item();
      if (phase_hook) phase_hook('n');
    }

    // (5) Generator step against the freshly updated critics.
    {
      adam_g_.zero_grad();
      loss::ObjectiveTerms<Var<T>> terms = zero_terms();
      terms.mse = loss::mse(v_hat, target_leaf);
      terms.ssim = loss::ssim_loss(to_unit(v_hat), to_unit(target_leaf),
                                   static_cast<int>(cfg_.ssim_window));
      terms.grad = loss::gradient_loss(v_hat, target_leaf);
      terms.memory_entropy = loss::memory_entropy(gen_out.memory_weights);
      terms.adv_gen = loss::adv_generator_term(critic_score(disc_.logit_map(v_hat)));
      terms.normalcy_gen = loss::adv_generator_term(critic_score(cls_.logit_map(v_hat)));
      Var<T> l_g = loss::compose_objectives(terms, lw).generator;
      l_g.backward();
      adam_g_.step();
      report.mse = terms.mse.value().item();
      report.ssim = terms.ssim.value().item();
      report.grad = terms.grad.value().item();
      report.mem = terms.memory_entropy.value().item();
      report.g_total = l_g.value().item();
      if (phase_hook) phase_hook('g');
    }

    if (!report.all_finite())
      throw NumericError("non-finite loss at iteration " + std::to_string(iteration_) + ": " +
                         report.describe());
    ++iteration_;
    return report;
  }

  // -- full run --------------------------------------------------------------

  /// Runs to cfg.iterations, writing resolved.cfg, train_log.csv and
  /// checkpoints under out_dir; returns the final checkpoint path.
  std::filesystem::path run(const std::filesystem::path& out_dir) {
    require<ConfigError>(!windows_.empty(), "no training data attached");
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream cfg_dump(out_dir / "resolved.cfg");
      cfg_dump << cfg_.dump();
    }
    const auto log_path = out_dir / "train_log.csv";
    const bool fresh = iteration_ == 0 || !std::filesystem::exists(log_path);
    std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) log << LossReport::csv_header() << "\n";
    while (iteration_ < cfg_.iterations) {
      LossReport report = step();
      if (report.iteration % cfg_.log_every == 0) log << report.csv_row() << "\n";
      if (iteration_ % cfg_.checkpoint_every == 0 && iteration_ < cfg_.iterations) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoint_%06lld.bin",
                      static_cast<long long>(iteration_));
        save_state(out_dir / name);
      }
    }
    const auto final_path = out_dir / "checkpoint_final.bin";
    save_state(final_path);
    return final_path;
  }

  // -- checkpointing -----------------------------------------------------------

  Checkpoint to_checkpoint() {
    Checkpoint ckpt;
    ckpt.config_hash = cfg_.hash();
    ckpt.iteration = iteration_;
    ckpt.master_seed = cfg_.seed;
    ckpt.config_text = cfg_.dump();
    ckpt.adam_steps = {adam_g_.step_count(), adam_d_.step_count(), adam_n_.step_count()};
    auto dump_group = [&ckpt](nn::Adam<T>& adam, const std::string& tag) {
      const auto& params = adam.params();
      for (std::size_t i = 0; i < params.size(); ++i) {
        ckpt.tensors.emplace_back(params[i].first, params[i].second.value());
        ckpt.tensors.emplace_back("adam." + tag + ".m." + params[i].first, adam.moments_m()[i]);
        ckpt.tensors.emplace_back("adam." + tag + ".v." + params[i].first, adam.moments_v()[i]);
      }
    };
    dump_group(adam_g_, "g");
    dump_group(adam_d_, "d");
    dump_group(adam_n_, "n");
    return ckpt;
  }

  void save_state(const std::filesystem::path& path) { save_checkpoint(to_checkpoint(), path); }

  void load_state(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    require<ConfigError>(ckpt.config_hash == cfg_.hash(),
                         "checkpoint '", path.string(),
                         "' was produced by a different resolved configuration");
    iteration_ = ckpt.iteration;
    adam_g_.step_count() = ckpt.adam_steps[0];
    adam_d_.step_count() = ckpt.adam_steps[1];
    adam_n_.step_count() = ckpt.adam_steps[2];
    auto restore_group = [&ckpt](nn::Adam<T>& adam, const std::string& tag) {
      auto& params = adam.params_mut();
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<float>* v = ckpt.find(params[i].first);
        const Tensor<float>* m = ckpt.find("adam." + tag + ".m." + params[i].first);
        const Tensor<float>* vv = ckpt.find("adam." + tag + ".v." + params[i].first);
        require<IoError>(v && m && vv, "checkpoint missing tensor '", params[i].first, "'");
        require<IoError>(v->shape() == params[i].second.shape(), "checkpoint tensor '",
                         params[i].first, "' has shape ", v->shape().str(), ", expected ",
                         params[i].second.shape().str());
        std::copy_n(v->data(), v->numel(), params[i].second.mutable_value().data());
        std::copy_n(m->data(), m->numel(), adam.moments_m()[i].data());
        std::copy_n(vv->data(), vv->numel(), adam.moments_v()[i].data());
      }
    };
    restore_group(adam_g_, "g");
    restore_group(adam_d_, "d");
    restore_group(adam_n_, "n");
  }

  // -- accessors ---------------------------------------------------------------

  const TrainConfig& config() const { return cfg_; }
  Generator<T>& generator() { return gen_; }
  PatchCritic<T>& discriminator() { return disc_; }
  PatchCritic<T>& classifier() { return cls_; }
  Var<T>& arcface_centers() { return centers_; }
  const FrozenFeatureExtractor<T>& extractor() const { return extractor_; }
  long long iteration() const { return iteration_; }
  Index attention_height() const { return attn_h_; }
  Index attention_width() const { return attn_w_; }

 private:
  static loss::ObjectiveTerms<Var<T>> zero_terms() {
    loss::ObjectiveTerms<Var<T>> t;
    t.mse = t.ssim = t.grad = t.memory_entropy = constant<T>(0);
    t.adv_gen = t.adv_disc = t.normalcy_gen = constant<T>(0);
    t.n = t.rn = t.aa = t.raa = constant<T>(0);
    return t;
  }

  static Var<T> to_unit(const Var<T>& frame) {
    return mul_scalar(add_scalar(frame, T(1)), T(0.5));
  }

  /// One pseudo-anomaly for a sample: donor from the donor pool (or the
  /// clip's own input frames when none is configured), pasted onto a random
  /// input frame; empty pastes are redrawn a bounded number of times.
  PseudoAnomaly synthesize_for(const Clip& clip, Rng& rng) {
    const float threshold = static_cast<float>(cfg_.scda_threshold);
    for (long long attempt = 0;; ++attempt) {
      const Index base_idx = rng.uniform_index(cfg_.t_frames);
      const Frame& base = clip.inputs[static_cast<std::size_t>(base_idx)];
      Frame donor;
      std::uint64_t mask_key = 0;
      if (!donor_frames_.empty()) {
        const auto [dv, df] = donor_frames_[static_cast<std::size_t>(
            rng.uniform_index(static_cast<Index>(donor_frames_.size())))];
        donor = donor_store_.get(dv, df);
        mask_key = 0x8000000000000000ULL | (static_cast<std::uint64_t>(dv) << 24) |
                   static_cast<std::uint64_t>(df);
      } else {
        const Index di = rng.uniform_index(cfg_.t_frames);
        donor = clip.inputs[static_cast<std::size_t>(di)];
        mask_key = 0;  // VAD frames are transient; skip the cache
      }
      const Tensor<float>* cached = nullptr;
      if (mask_key && mask_cache_.count(mask_key)) cached = &mask_cache_.at(mask_key);
      Tensor<float> mask =
          cached ? *cached : locate_foreground(donor.pixels, extractor_, threshold);
      if (mask_key && !cached) mask_cache_.emplace(mask_key, mask);
      const PasteBox box = sample_paste_box(cfg_.image_size, cfg_.image_size, rng,
                                            static_cast<int>(cfg_.paste_max_retries));
      PseudoAnomaly pa = paste_object(base, donor, mask, box);
      if (!pa.empty_paste || attempt >= cfg_.paste_max_retries) return pa;
    }
  }

  TrainConfig cfg_;
  LossWeights weights_;
  FrozenFeatureExtractor<T> extractor_;
  Generator<T> gen_;
  PatchCritic<T> disc_, cls_;
  Var<T> centers_;
  Index attn_h_ = 0, attn_w_ = 0;
  nn::Adam<T> adam_g_, adam_d_, adam_n_;

  DatasetManifest train_manifest_, donor_manifest_;
  FrameStore train_store_, donor_store_;
  std::vector<std::pair<Index, Index>> windows_;       // (video, start)
  std::vector<std::pair<Index, Index>> donor_frames_;  // (video, frame)
  std::map<std::uint64_t, Tensor<float>> mask_cache_;
  long long iteration_ = 0;
};

}  // namespace xvad
