#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xvad/core/random.hpp"
#include "xvad/data/dataset.hpp"

namespace xvad::toy {

/// Synthetic corpus: bright circles/squares drifting over a dark background
/// (normal), triangles/crosses in the donor set, and a striped diamond with
/// animated texture injected into test videos during the anomaly span.
struct ToySpec {
  Index resolution = 64;
  Index video_length = 80;
  Index train_videos = 20;
  Index test_videos = 10;
  Index ti_videos = 4;
  Index anomaly_start = 20;
  Index anomaly_end = 40;
  std::uint64_t seed = 1;

  void validate() const {
    require<ConfigError>(resolution >= 16, "toy resolution must be >= 16");
    require<ConfigError>(video_length >= 8, "toy video_length must be >= 8");
    require<ConfigError>(train_videos >= 1 && test_videos >= 1 && ti_videos >= 1,
                         "toy video counts must be >= 1");
    require<ConfigError>(0 <= anomaly_start && anomaly_start < anomaly_end &&
                             anomaly_end <= video_length,
                         "anomaly span [", anomaly_start, ",", anomaly_end,
                         ") must lie inside the video length ", video_length);
  }
};

inline ToySpec toy_spec_from_json(const nlohmann::json& j) {
  ToySpec s;
  if (j.contains("resolution")) s.resolution = j.at("resolution").get<Index>();
  if (j.contains("video_length")) s.video_length = j.at("video_length").get<Index>();
  if (j.contains("train_videos")) s.train_videos = j.at("train_videos").get<Index>();
  if (j.contains("test_videos")) s.test_videos = j.at("test_videos").get<Index>();
  if (j.contains("ti_videos")) s.ti_videos = j.at("ti_videos").get<Index>();
  if (j.contains("anomaly_start")) s.anomaly_start = j.at("anomaly_start").get<Index>();
  if (j.contains("anomaly_end")) s.anomaly_end = j.at("anomaly_end").get<Index>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

struct ToyCorpus {
  std::filesystem::path root;
  DatasetManifest train, test, ti;
};

namespace detail {

enum class Kind { Circle, Square, Triangle, Cross, Diamond };

struct Object {
  Kind kind;
  double cx, cy, vx, vy, r;
  double color[3];
  double alt_color[3];  // second stripe color (diamond only)
};

inline bool inside(Kind kind, double dx, double dy, double r) {
  switch (kind) {
    case Kind::Circle: return dx * dx + dy * dy <= r * r;
    case Kind::Square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case Kind::Triangle: return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.5;
    case Kind::Cross:
      return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) ||
             (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
    case Kind::Diamond: return std::abs(dx) + std::abs(dy) <= r;
  }
  return false;
}

inline Object random_object(Rng& rng, const std::vector<Kind>& kinds, Index res) {
  Object o;
  o.kind = kinds[static_cast<std::size_t>(rng.uniform_index(static_cast<Index>(kinds.size())))];
  o.cx = rng.uniform(0.0, static_cast<double>(res));
  o.cy = rng.uniform(0.0, static_cast<double>(res));
  const double speed_lo = 0.6, speed_hi = 1.8;
  o.vx = rng.uniform(speed_lo, speed_hi) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  o.vy = rng.uniform(speed_lo, speed_hi) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  o.r = rng.uniform(0.09, 0.16) * res;
  for (int c = 0; c < 3; ++c) {
    o.color[c] = rng.uniform(0.55, 0.95);
    o.alt_color[c] = o.color[c];
  }
  return o;
}

inline Object anomaly_object(Rng& rng, Index res) {
  Object o;
  o.kind = Kind::Diamond;
  o.cx = rng.uniform(0.2, 0.8) * res;
  o.cy = rng.uniform(0.2, 0.8) * res;
  o.vx = rng.uniform(2.2, 3.2) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  o.vy = rng.uniform(2.2, 3.2) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  o.r = rng.uniform(0.14, 0.2) * res;
  o.color[0] = 0.20; o.color[1] = 0.30; o.color[2] = 0.55;
  o.alt_color[0] = 0.65; o.alt_color[1] = 0.25; o.alt_color[2] = 0.15;
  return o;
}

inline void draw(Tensor<float>& img, const Object& o, Index res, Index frame_idx) {
  const Index H = res, W = res;
  // Wrap-around: test the 9 toroidal offsets of the centre.
  for (int oy = -1; oy <= 1; ++oy)
    for (int ox = -1; ox <= 1; ++ox) {
      const double cx = o.cx + ox * W, cy = o.cy + oy * H;
      if (cx < -o.r - 1 || cx > W + o.r + 1 || cy < -o.r - 1 || cy > H + o.r + 1) continue;
      const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - o.r)));
      const Index y1 = std::min<Index>(H - 1, static_cast<Index>(std::ceil(cy + o.r)));
      const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - o.r)));
      const Index x1 = std::min<Index>(W - 1, static_cast<Index>(std::ceil(cx + o.r)));
      for (Index y = y0; y <= y1; ++y)
        for (Index x = x0; x <= x1; ++x) {
          const double dx = x - cx, dy = y - cy;
          if (!inside(o.kind, dx, dy, o.r)) continue;
          const double* col = o.color;
          if (o.kind == Kind::Diamond) {
            // Animated stripes move through the object frame to frame.
            const long long band =
                static_cast<long long>(std::floor((dx + dy + 1.5 * frame_idx) / 3.0));
            if (band % 2 == 0) col = o.alt_color;
          }
          for (Index c = 0; c < 3; ++c)
            img[(c * H + y) * W + x] = static_cast<float>(col[c]);
        }
    }
}

inline void render_video(const std::filesystem::path& dir, Index res, Index length,
                         std::vector<Object> objects, const Object* anomaly, Index a_begin,
                         Index a_end) {
  std::filesystem::create_directories(dir);
  for (Index f = 0; f < length; ++f) {
    Tensor<float> img(Shape{3, res, res});
    for (Index c = 0; c < 3; ++c) {
      const double base = 0.05 + 0.02 * c;
      for (Index y = 0; y < res; ++y) {
        const double v = base + 0.06 * static_cast<double>(y) / res;
        for (Index x = 0; x < res; ++x) img[(c * res + y) * res + x] = static_cast<float>(v);
      }
    }
    for (const auto& o : objects) draw(img, o, res, f);
    if (anomaly && f >= a_begin && f < a_end) draw(img, *anomaly, res, f);
    for (Index i = 0; i < img.numel(); ++i) img[i] *= 255.0f;
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(f));
    write_image(dir / name, img);
    // Advance motion (linear, toroidal).
    for (auto& o : objects) {
      o.cx = std::fmod(o.cx + o.vx + res, static_cast<double>(res));
      o.cy = std::fmod(o.cy + o.vy + res, static_cast<double>(res));
    }
  }
}

}  // namespace detail

/// Writes the corpus under `root` (train/, test/, ti/) together with three
/// manifest JSON files, and returns the manifests.
inline ToyCorpus generate_toy_dataset(const ToySpec& spec, const std::filesystem::path& root) {
  spec.validate();
  using detail::Kind;
  const std::vector<Kind> normal_kinds{Kind::Circle, Kind::Square};
  const std::vector<Kind> ti_kinds{Kind::Triangle, Kind::Cross};

  auto make_video = [&](const std::filesystem::path& dir, std::uint64_t stream,
                        const std::vector<Kind>& kinds, bool with_anomaly) {
    Rng rng(Rng::mix(spec.seed, stream));
    std::vector<detail::Object> objs;
    const Index n_objs = 2 + rng.uniform_index(2);  // 2..3 moving shapes
    for (Index i = 0; i < n_objs; ++i) objs.push_back(detail::random_object(rng, kinds, spec.resolution));
    if (with_anomaly) {
      const detail::Object a = detail::anomaly_object(rng, spec.resolution);
      detail::render_video(dir, spec.resolution, spec.video_length, objs, &a, spec.anomaly_start,
                           spec.anomaly_end);
    } else {
      detail::render_video(dir, spec.resolution, spec.video_length, objs, nullptr, 0, 0);
    }
  };

  char vid[32];
  for (Index i = 0; i < spec.train_videos; ++i) {
    std::snprintf(vid, sizeof(vid), "train%03d", static_cast<int>(i));
    make_video(root / "train" / vid, 0x1000 + static_cast<std::uint64_t>(i), normal_kinds, false);
  }
  for (Index i = 0; i < spec.test_videos; ++i) {
    std::snprintf(vid, sizeof(vid), "test%03d", static_cast<int>(i));
    make_video(root / "test" / vid, 0x2000 + static_cast<std::uint64_t>(i), normal_kinds, true);
    std::ofstream labels(root / "test" / (std::string(vid) + ".labels.txt"));
    for (Index f = 0; f < spec.video_length; ++f)
      labels << ((f >= spec.anomaly_start && f < spec.anomaly_end) ? 1 : 0) << "\n";
  }
  for (Index i = 0; i < spec.ti_videos; ++i) {
    std::snprintf(vid, sizeof(vid), "ti%03d", static_cast<int>(i));
    make_video(root / "ti" / vid, 0x3000 + static_cast<std::uint64_t>(i), ti_kinds, false);
  }

  ToyCorpus corpus;
  corpus.root = root;
  corpus.train = build_manifest(root / "train", DatasetKind::VadTrain);
  corpus.test = build_manifest(root / "test", DatasetKind::VadTest);
  corpus.ti = build_manifest(root / "ti", DatasetKind::TaskIrrelevant);
  save_manifest(corpus.train, root / "train_manifest.json");
  save_manifest(corpus.test, root / "test_manifest.json");
  save_manifest(corpus.ti, root / "ti_manifest.json");
  return corpus;
}

}  // namespace xvad::toy
