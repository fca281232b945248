#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xvad/data/dataset.hpp"
#include "xvad/eval/metrics.hpp"
#include "xvad/model/checkpoint.hpp"
#include "xvad/model/generator.hpp"
#include "xvad/train/config.hpp"

namespace xvad {

/// Rebuilds the generator described by a checkpoint's embedded configuration
/// and restores its parameters (memory bank included).
inline Generator<float> generator_from_checkpoint(const Checkpoint& ckpt,
                                                  TrainConfig* config_out = nullptr) {
  require<IoError>(!ckpt.config_text.empty(), "checkpoint carries no embedded configuration");
  TrainConfig cfg = TrainConfig::from_string(ckpt.config_text);
  if (config_out) *config_out = cfg;
  Rng rng(Rng::mix(cfg.seed, 0x1a2b));
  Generator<float> gen(cfg.generator_config(), rng);
  for (auto& [name, var] : gen.parameters()) {
    const Tensor<float>* stored = ckpt.find(name);
    require<IoError>(stored != nullptr, "checkpoint missing generator tensor '", name, "'");
    require<IoError>(stored->shape() == var.shape(), "checkpoint tensor '", name, "' has shape ",
                     stored->shape().str(), ", expected ", var.shape().str());
    std::copy_n(stored->data(), stored->numel(), var.mutable_value().data());
  }
  return gen;
}

/// Per-video scoring output: PSNR per predicted frame (frames T..L-1), the
/// normalized anomaly score, and the aligned ground-truth labels.
struct AnomalyScoreSeries {
  std::string video_id;
  std::vector<double> psnr;
  std::vector<double> anomaly;
  std::vector<int> labels;
  std::optional<double> video_auc;  // absent when the video has a single class
};

struct EvalResult {
  std::vector<AnomalyScoreSeries> videos;
  std::optional<double> pooled_auc;  // absent when the pooled labels are single-class
  double mean_video_auc = 0.0;       // over videos where per-video AUC is defined
  Index skipped_videos = 0;
};

/// Slides a stride-1 window over every test video, predicts each next frame,
/// converts PSNR into per-video normalized anomaly scores, and pools the
/// frame-level AUC over the whole set.
inline EvalResult score_dataset(Generator<float>& gen, const DatasetManifest& manifest,
                                Index image_size, Index t_frames, bool invert = true,
                                Index batch_windows = 8) {
  NoGradGuard no_grad;
  EvalResult result;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;
  for (const auto& video : manifest.videos) {
    if (video.frame_count < t_frames + 1) {
      log_warn("video '" + video.video_id + "' shorter than T+1 frames; skipped");
      ++result.skipped_videos;
      continue;
    }
    std::vector<Tensor<float>> frames;
    frames.reserve(static_cast<std::size_t>(video.frame_count));
    for (Index f = 0; f < video.frame_count; ++f)
      frames.push_back(load_frame(video, f, image_size).pixels);

    AnomalyScoreSeries series;
    series.video_id = video.video_id;
    const Index n_windows = video.frame_count - t_frames;
    for (Index start = 0; start < n_windows; start += batch_windows) {
      const Index bsz = std::min<Index>(batch_windows, n_windows - start);
      Tensor<float> x(Shape::nchw(bsz, t_frames * 3, image_size, image_size));
      for (Index b = 0; b < bsz; ++b)
        for (Index f = 0; f < t_frames; ++f)
          std::copy_n(frames[static_cast<std::size_t>(start + b + f)].data(),
                      3 * image_size * image_size,
                      x.data() + ((b * t_frames + f) * 3) * image_size * image_size);
      const Tensor<float> pred = gen.forward(Var<float>(x)).frame.value();
      for (Index b = 0; b < bsz; ++b) {
        Tensor<float> one(Shape{3, image_size, image_size});
        std::copy_n(pred.data() + b * one.numel(), one.numel(), one.data());
        const Tensor<float>& truth = frames[static_cast<std::size_t>(start + b + t_frames)];
        series.psnr.push_back(psnr(to_unit_range(one), to_unit_range(truth)));
        if (!video.labels.empty())
          series.labels.push_back(video.labels[static_cast<std::size_t>(start + b + t_frames)]);
      }
    }
    series.anomaly = normalize_and_score(series.psnr, invert);
    if (!series.labels.empty()) {
      bool has_pos = false, has_neg = false;
      for (int l : series.labels) (l ? has_pos : has_neg) = true;
      if (has_pos && has_neg) series.video_auc = roc_auc(series.anomaly, series.labels);
      pooled_scores.insert(pooled_scores.end(), series.anomaly.begin(), series.anomaly.end());
      pooled_labels.insert(pooled_labels.end(), series.labels.begin(), series.labels.end());
    }
    result.videos.push_back(std::move(series));
  }
  bool pooled_pos = false, pooled_neg = false;
  for (int l : pooled_labels) (l ? pooled_pos : pooled_neg) = true;
  if (pooled_pos && pooled_neg) result.pooled_auc = roc_auc(pooled_scores, pooled_labels);
  else if (!pooled_labels.empty())
    log_warn("pooled AUC undefined: test labels contain a single class");
  double auc_sum = 0.0;
  Index auc_count = 0;
  for (const auto& v : result.videos)
    if (v.video_auc) {
      auc_sum += *v.video_auc;
      ++auc_count;
    }
  result.mean_video_auc = auc_count ? auc_sum / static_cast<double>(auc_count) : 0.0;
  return result;
}

}  // namespace xvad
