// Minimal end-to-end walkthrough: synthesize a tiny shape-video corpus, train
// for a handful of iterations, then score the labeled test videos.
//
// The CLI (tools/xvad) drives the same pipeline at full scale; this sample
// shows the library API.

#include <cstdio>
#include <filesystem>

#include "xvad/eval/score.hpp"
#include "xvad/toy/toybench.hpp"
#include "xvad/train/trainer.hpp"

int main() {
  namespace fs = std::filesystem;
  using namespace xvad;

  const fs::path root = fs::temp_directory_path() / "xvad_sample";
  fs::remove_all(root);

  toy::ToySpec spec;
  spec.resolution = 32;
  spec.video_length = 24;
  spec.train_videos = 4;
  spec.test_videos = 2;
  spec.ti_videos = 2;
  spec.anomaly_start = 8;
  spec.anomaly_end = 16;
  const toy::ToyCorpus corpus = toy::generate_toy_dataset(spec, root / "corpus");

  TrainConfig cfg;
  cfg.train_data = (corpus.root / "train").string();
  cfg.donor_data = (corpus.root / "ti").string();
  cfg.image_size = 32;
  cfg.batch_size = 4;
  cfg.iterations = 60;
  cfg.gen_widths = "12,24";
  cfg.critic_widths = "12,24";
  cfg.memory_items = 32;
  cfg.extractor = "rand_tiny";

  Trainer trainer(cfg);
  for (long long i = 0; i < cfg.iterations; ++i) {
    const LossReport report = trainer.step();
    if (report.iteration % 20 == 0)
      std::printf("iter %3lld  mse %.4f  g %.4f  d %.4f  n %.4f\n", report.iteration, report.mse,
                  report.g_total, report.d_total, report.n_total);
  }

  EvalResult result =
      score_dataset(trainer.generator(), corpus.test, cfg.image_size, cfg.t_frames);
  if (result.pooled_auc)
    std::printf("pooled AUC after %lld iterations: %.3f\n", cfg.iterations, *result.pooled_auc);
  return 0;
}
