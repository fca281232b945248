#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "xvad/eval/efficiency.hpp"
#include "xvad/eval/score.hpp"
#include "xvad/rel/embedding.hpp"
#include "xvad/toy/toybench.hpp"
#include "xvad/train/trainer.hpp"

namespace xvad::cli {

namespace detail {

inline std::filesystem::path resolve_out(const std::string& out) {
  std::filesystem::path p(out);
  if (const char* root = std::getenv("XVAD_OUT_ROOT"); root && p.is_relative())
    p = std::filesystem::path(root) / p;
  return p;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require<IoError>(out.good(), "cannot write '", path.string(), "'");
  out << text;
}

/// Small anomaly-curve raster: score trace over shaded ground-truth spans.
inline void write_curve_image(const std::filesystem::path& path,
                              const AnomalyScoreSeries& series) {
  const Index n = static_cast<Index>(series.anomaly.size());
  const Index H = 128, W = std::max<Index>(n, 16);
  Tensor<float> img(Shape{3, H, W}, 245.0f);
  for (Index x = 0; x < n; ++x) {
    if (!series.labels.empty() && series.labels[static_cast<std::size_t>(x)] == 1)
      for (Index y = 0; y < H; ++y) {
        img.at(0, y, x) = 252.0f;
        img.at(1, y, x) = 220.0f;
        img.at(2, y, x) = 220.0f;
      }
  }
  for (Index x = 0; x < n; ++x) {
    const double a = series.anomaly[static_cast<std::size_t>(x)];
    const Index y = static_cast<Index>(std::llround((1.0 - a) * (H - 1)));
    for (Index dy = -1; dy <= 1; ++dy) {
      const Index yy = std::clamp<Index>(y + dy, 0, H - 1);
      img.at(0, yy, x) = 180.0f;
      img.at(1, yy, x) = 30.0f;
      img.at(2, yy, x) = 30.0f;
    }
  }
  write_image(path, img);
}

inline int run_preprocess(const std::string& toy_spec, const std::string& video_root,
                          const std::string& manifest_root, const std::string& kind,
                          double fps, const std::string& out) {
  const auto out_path = resolve_out(out);
  if (!toy_spec.empty()) {
    toy::ToySpec spec;
    if (toy_spec != "default") {
      std::ifstream in(toy_spec);
      require<ConfigError>(in.good(), "cannot open toy spec '", toy_spec, "'");
      nlohmann::json j;
      in >> j;
      spec = toy::toy_spec_from_json(j);
    }
    toy::ToyCorpus corpus = toy::generate_toy_dataset(spec, out_path);
    std::cout << "toy corpus at " << corpus.root.string() << ": " << corpus.train.videos.size()
              << " train / " << corpus.test.videos.size() << " test / "
              << corpus.ti.videos.size() << " donor videos\n";
    return 0;
  }
  if (!video_root.empty()) {
    // Container decoding stays outside the training loop; delegate to an
    // external ffmpeg if one is installed.
    require<ConfigError>(std::system("ffmpeg -version > /dev/null 2>&1") == 0,
                         "video decoding requires ffmpeg on PATH; extract frames to "
                         "<root>/<video_id>/000000.png... and rerun without --video-root");
    std::filesystem::create_directories(out_path);
    for (const auto& entry : std::filesystem::directory_iterator(video_root)) {
      if (!entry.is_regular_file()) continue;
      const auto stem = entry.path().stem().string();
      std::filesystem::create_directories(out_path / stem);
      std::ostringstream cmd;
      cmd << "ffmpeg -loglevel error -i '" << entry.path().string() << "' -vf fps=" << fps
          << " -start_number 0 '" << (out_path / stem / "%06d.png").string() << "'";
      require<IoError>(std::system(cmd.str().c_str()) == 0, "ffmpeg failed for '",
                       entry.path().string(), "'");
    }
    std::cout << "frames extracted to " << out_path.string() << "\n";
    return 0;
  }
  require<ConfigError>(!manifest_root.empty(),
                       "preprocess needs one of --toy, --video-root, --build-manifest");
  const DatasetManifest m = build_manifest(manifest_root, dataset_kind_from_string(kind));
  save_manifest(m, out_path);
  std::cout << "manifest with " << m.videos.size() << " videos -> " << out_path.string() << "\n";
  return 0;
}

inline int run_train(const std::string& config_path, const std::string& resume,
                     const std::string& out, std::uint64_t seed_override, int deterministic,
                     long long iterations_override) {
  TrainConfig cfg;
  Checkpoint resume_ckpt;
  if (!resume.empty()) {
    resume_ckpt = load_checkpoint(resume);
    require<ConfigError>(!resume_ckpt.config_text.empty(),
                         "checkpoint has no embedded config; pass --config");
    cfg = TrainConfig::from_string(resume_ckpt.config_text);
    require<ConfigError>(config_path.empty() || TrainConfig::from_file(config_path).hash() == cfg.hash(),
                         "--config disagrees with the checkpoint's resolved configuration");
    require<ConfigError>(seed_override == 0 && deterministic < 0,
                         "seed/deterministic overrides are not allowed when resuming");
  } else {
    require<ConfigError>(!config_path.empty(), "train needs --config (or --resume)");
    cfg = TrainConfig::from_file(config_path);
    if (seed_override != 0) cfg.seed = seed_override;
    if (deterministic >= 0) cfg.deterministic = deterministic != 0;
  }
  if (iterations_override > 0) cfg.iterations = iterations_override;
  Trainer trainer(cfg);
  if (!resume.empty()) trainer.load_state(resume);
  const auto final_path = trainer.run(resolve_out(out));
  std::cout << "final checkpoint: " << final_path.string() << "\n";
  return 0;
}

inline int run_eval(const std::string& checkpoint_path, const std::string& data,
                    const std::string& out, int fps_runs, bool curves) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  TrainConfig cfg;
  Generator<float> gen = generator_from_checkpoint(ckpt, &cfg);
  const DatasetManifest manifest = Trainer::resolve_manifest(data, DatasetKind::VadTest);
  const auto out_dir = resolve_out(out);
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "resolved.cfg", cfg.dump());

  EvalResult result =
      score_dataset(gen, manifest, cfg.image_size, cfg.t_frames, cfg.score_invert);
  for (const auto& series : result.videos) {
    std::ostringstream csv;
    csv << "frame_index,psnr,anomaly_score,label\n";
    csv.precision(10);
    for (std::size_t i = 0; i < series.anomaly.size(); ++i) {
      csv << (i + static_cast<std::size_t>(cfg.t_frames)) << ',' << series.psnr[i] << ','
          << series.anomaly[i] << ',';
      if (!series.labels.empty()) csv << series.labels[i];
      csv << "\n";
    }
    write_text(out_dir / (series.video_id + ".csv"), csv.str());
    if (curves) write_curve_image(out_dir / (series.video_id + "_curve.png"), series);
  }

  EfficiencyReport eff = efficiency_report(gen, cfg.image_size, fps_runs);
  nlohmann::json j;
  if (result.pooled_auc) j["auc_pooled"] = *result.pooled_auc;
  else j["auc_pooled"] = nullptr;
  j["auc_mean_video"] = result.mean_video_auc;
  j["skipped_videos"] = result.skipped_videos;
  j["config_hash"] = ckpt.config_hash;
  j["iteration"] = ckpt.iteration;
  j["efficiency"] = {{"parameters_millions", eff.parameters_millions},
                     {"gmacs", eff.gmacs},
                     {"fps", eff.fps}};
  j["videos"] = nlohmann::json::array();
  for (const auto& v : result.videos) {
    nlohmann::json jv{{"video_id", v.video_id}, {"frames_scored", v.anomaly.size()}};
    if (v.video_auc) jv["auc"] = *v.video_auc;
    j["videos"].push_back(jv);
  }
  write_text(out_dir / "summary.json", j.dump(2) + "\n");
  std::cout << "pooled AUC " << (result.pooled_auc ? std::to_string(*result.pooled_auc) : "n/a")
            << " over " << result.videos.size()
            << " videos (summary: " << (out_dir / "summary.json").string() << ")\n";
  return 0;
}

inline int run_synth(const std::string& config_path, long long count, const std::string& out,
                     std::uint64_t seed_override) {
  TrainConfig cfg = TrainConfig::from_file(config_path);
  if (seed_override != 0) cfg.seed = seed_override;
  require<ConfigError>(!cfg.train_data.empty(), "synth needs train_data in the config");
  const auto out_dir = resolve_out(out);
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "resolved.cfg", cfg.dump());

  const DatasetManifest base_manifest =
      Trainer::resolve_manifest(cfg.train_data, DatasetKind::VadTrain);
  const DatasetManifest donor_manifest =
      cfg.donor_data.empty() ? base_manifest
                             : Trainer::resolve_manifest(cfg.donor_data, DatasetKind::TaskIrrelevant);
  FrozenFeatureExtractor<float> extractor(cfg.extractor, Rng::mix(cfg.seed, 0x0e37));

  for (long long i = 0; i < count; ++i) {
    const std::uint64_t sample_seed = Rng::mix(cfg.seed, 0x5e0 + static_cast<std::uint64_t>(i));
    Rng rng(sample_seed);
    const auto& bv = base_manifest.videos[static_cast<std::size_t>(
        rng.uniform_index(static_cast<Index>(base_manifest.videos.size())))];
    Frame base = load_frame(bv, rng.uniform_index(bv.frame_count), cfg.image_size);
    const auto& dv = donor_manifest.videos[static_cast<std::size_t>(
        rng.uniform_index(static_cast<Index>(donor_manifest.videos.size())))];
    Frame donor = load_frame(dv, rng.uniform_index(dv.frame_count), cfg.image_size);
    PseudoAnomaly pa = synthesize(base, donor, extractor,
                                  static_cast<float>(cfg.scda_threshold), rng, sample_seed);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%03lld", i);
    write_image(out_dir / (std::string(stem) + "_frame.png"),
                denormalize_frame(pa.frame));
    Tensor<float> mask_img(Shape{3, cfg.image_size, cfg.image_size});
    for (Index px = 0; px < pa.mask.numel(); ++px)
      for (Index c = 0; c < 3; ++c)
        mask_img[c * pa.mask.numel() + px] = pa.mask[px] * 255.0f;
    write_image(out_dir / (std::string(stem) + "_mask.png"), mask_img);
    nlohmann::json j{{"base_video", pa.base_id},
                     {"base_frame", pa.base_index},
                     {"donor_video", pa.donor_id},
                     {"donor_frame", pa.donor_index},
                     {"box", {pa.box.b1, pa.box.b2, pa.box.b3, pa.box.b4}},
                     {"beta", pa.box.beta},
                     {"empty_paste", pa.empty_paste},
                     {"seed", pa.seed}};
    write_text(out_dir / (std::string(stem) + ".json"), j.dump(2) + "\n");
  }
  std::cout << count << " pseudo-anomalies -> " << out_dir.string() << "\n";
  return 0;
}

inline int run_relevancy(const std::string& labels_p, const std::string& labels_q,
                         const std::string& embeddings, const std::string& out) {
  const LabelSet p = LabelSet::from_file(labels_p);
  const LabelSet q = LabelSet::from_file(labels_q);
  std::unique_ptr<EmbeddingProvider> provider;
  if (!embeddings.empty()) {
    std::set<std::string> vocab = p.vocabulary();
    for (const auto& t : q.vocabulary()) vocab.insert(t);
    provider = std::make_unique<Word2VecEmbeddingProvider>(embeddings, vocab);
  } else {
    log_warn("no --embeddings given; using the deterministic hash provider "
             "(similarities carry no semantics)");
    provider = std::make_unique<HashEmbeddingProvider>();
  }
  const RelevancyResult result = mean_abs_cos_sim(p, q, *provider);
  std::cout.precision(6);
  std::cout << "mean absolute cosine similarity: " << result.mean_abs_cos << "\n";
  if (!out.empty()) {
    const auto out_dir = resolve_out(out);
    std::ostringstream csv;
    csv.precision(10);
    csv << "label_p\\label_q";
    for (const auto& ql : q.labels) csv << ',' << ql;
    csv << "\n";
    for (std::size_t i = 0; i < p.labels.size(); ++i) {
      csv << p.labels[i];
      for (std::size_t j = 0; j < q.labels.size(); ++j) csv << ',' << result.pairwise[i][j];
      csv << "\n";
    }
    write_text(out_dir / "pairwise.csv", csv.str());
    nlohmann::json j{{"mean_abs_cos", result.mean_abs_cos},
                     {"labels_p", p.labels.size()},
                     {"labels_q", q.labels.size()},
                     {"provider", provider->source()}};
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
  }
  return 0;
}

inline int run_report(const std::string& checkpoint_path, const std::string& out, int fps_runs) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  TrainConfig cfg;
  Generator<float> gen = generator_from_checkpoint(ckpt, &cfg);
  EfficiencyReport eff = efficiency_report(gen, cfg.image_size, fps_runs);
  nlohmann::json j{{"parameters_millions", eff.parameters_millions},
                   {"gmacs", eff.gmacs},
                   {"fps", eff.fps},
                   {"image_size", cfg.image_size},
                   {"config_hash", ckpt.config_hash},
                   {"iteration", ckpt.iteration}};
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    const auto out_dir = resolve_out(out);
    write_text(out_dir / "efficiency.json", j.dump(2) + "\n");
    write_text(out_dir / "resolved.cfg", cfg.dump());
  }
  return 0;
}

}  // namespace detail

/// Parses and runs one subcommand. Exit codes: 0 success, 1 runtime failure,
/// 2 usage error, 3 configuration/validation error.
inline int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"cross-domain video anomaly detection toolkit"};
  app.name("xvad");
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("preprocess", "generate the toy corpus, extract frames, or build manifests");
  std::string toy_spec, video_root, manifest_root, kind = "vad-train", pre_out;
  double fps = 30.0;
  pre->add_option("--toy", toy_spec, "toy corpus spec JSON ('default' for built-in settings)");
  pre->add_option("--video-root", video_root, "directory of video files to split into frames");
  pre->add_option("--build-manifest", manifest_root, "frame-directory root to index");
  pre->add_option("--kind", kind, "manifest kind: vad-train | vad-test | ti");
  pre->add_option("--fps", fps, "frame extraction rate for --video-root");
  pre->add_option("--out", pre_out, "output directory or manifest file")->required();

  auto* train = app.add_subcommand("train", "train the three networks");
  std::string train_cfg, resume, train_out;
  std::uint64_t seed_override = 0;
  int deterministic = -1;
  long long iters_override = 0;
  train->add_option("--config", train_cfg, "flat key-value config file");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--seed", seed_override, "override the config seed");
  train->add_option("--deterministic", deterministic, "override the deterministic flag (0/1)");
  train->add_option("--iterations", iters_override, "override the iteration count");
  train->add_option("--out", train_out, "run directory")->required();

  auto* eval = app.add_subcommand("eval", "score a labeled test set and report AUC");
  std::string eval_ckpt, eval_data, eval_out;
  int fps_runs = 100;
  bool curves = false;
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
  eval->add_option("--data", eval_data, "test manifest JSON or frame root")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--fps-runs", fps_runs, "timed forward passes for the FPS figure (0 skips)");
  eval->add_flag("--curves", curves, "write per-video anomaly-curve images");

  auto* synth = app.add_subcommand("synth", "emit pseudo-abnormal frame/mask pairs");
  std::string synth_cfg, synth_out;
  long long synth_count = 8;
  std::uint64_t synth_seed = 0;
  synth->add_option("--config", synth_cfg, "config naming the data roots")->required();
  synth->add_option("--count", synth_count, "number of samples");
  synth->add_option("--seed", synth_seed, "override the config seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  auto* rel = app.add_subcommand("relevancy", "mean absolute cosine similarity between label sets");
  std::string labels_p, labels_q, embeddings, rel_out;
  rel->add_option("--labels-p", labels_p, "first label list (one label per line)")->required();
  rel->add_option("--labels-q", labels_q, "second label list")->required();
  rel->add_option("--embeddings", embeddings, "binary word-vector file");
  rel->add_option("--out", rel_out, "output directory for the pairwise matrix");

  auto* report = app.add_subcommand("report", "parameter/MAC/FPS report for a checkpoint");
  std::string report_ckpt, report_out;
  int report_fps_runs = 100;
  report->add_option("--checkpoint", report_ckpt, "trained checkpoint")->required();
  report->add_option("--out", report_out, "output directory");
  report->add_option("--fps-runs", report_fps_runs, "timed forward passes (0 skips)");

  std::vector<const char*> argv{"xvad"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(pre))
      return detail::run_preprocess(toy_spec, video_root, manifest_root, kind, fps, pre_out);
    if (app.got_subcommand(train))
      return detail::run_train(train_cfg, resume, train_out, seed_override, deterministic,
                               iters_override);
    if (app.got_subcommand(eval))
      return detail::run_eval(eval_ckpt, eval_data, eval_out, fps_runs, curves);
    if (app.got_subcommand(synth))
      return detail::run_synth(synth_cfg, synth_count, synth_out, synth_seed);
    if (app.got_subcommand(rel))
      return detail::run_relevancy(labels_p, labels_q, embeddings, rel_out);
    if (app.got_subcommand(report))
      return detail::run_report(report_ckpt, report_out, report_fps_runs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace xvad::cli
