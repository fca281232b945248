#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xvad/core/log.hpp"
#include "xvad/data/frame.hpp"

namespace xvad {

enum class DatasetKind { VadTrain, VadTest, TaskIrrelevant };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::VadTrain: return "vad-train";
    case DatasetKind::VadTest: return "vad-test";
    case DatasetKind::TaskIrrelevant: return "ti";
  }
  return "?";
}

inline DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "vad-train") return DatasetKind::VadTrain;
  if (s == "vad-test") return DatasetKind::VadTest;
  if (s == "ti") return DatasetKind::TaskIrrelevant;
  throw ConfigError("unknown dataset kind '" + s + "'");
}

struct VideoEntry {
  std::string video_id;
  std::filesystem::path frame_dir;
  Index frame_count = 0;
  std::vector<int> labels;  // empty unless the manifest kind is vad-test
};

struct DatasetManifest {
  DatasetKind kind = DatasetKind::VadTrain;
  std::vector<VideoEntry> videos;

  Index total_frames() const {
    Index n = 0;
    for (const auto& v : videos) n += v.frame_count;
    return n;
  }
};

/// A training/scoring window: T consecutive input frames plus the next frame.
struct Clip {
  std::vector<Frame> inputs;
  Frame target;
};

namespace detail {

inline std::filesystem::path frame_path(const VideoEntry& v, Index idx) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(idx));
  return v.frame_dir / name;
}

inline std::vector<int> read_label_file(const std::filesystem::path& p, Index expected) {
  std::ifstream in(p);
  require<IoError>(in.good(), "cannot open label file '", p.string(), "'");
  std::vector<int> labels;
  int v = 0;
  while (in >> v) {
    require<IoError>(v == 0 || v == 1, "label file '", p.string(), "': labels must be 0/1, got ", v);
    labels.push_back(v);
  }
  require<IoError>(static_cast<Index>(labels.size()) == expected, "label file '", p.string(),
                   "': ", labels.size(), " labels for ", expected, " frames");
  return labels;
}

}  // namespace detail

/// Scans `<root>/<video_id>/<%06d>.png` directories (plus
/// `<root>/<video_id>.labels.txt` for vad-test) into a manifest.
inline DatasetManifest build_manifest(const std::filesystem::path& root, DatasetKind kind) {
  require<IoError>(std::filesystem::is_directory(root), "dataset root '", root.string(),
                   "' is not a directory");
  DatasetManifest m;
  m.kind = kind;
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    VideoEntry v;
    v.video_id = dir.filename().string();
    v.frame_dir = dir;
    Index count = 0;
    while (std::filesystem::exists(detail::frame_path(v, count))) ++count;
    if (count == 0) {
      log_warn("video directory '" + dir.string() + "' has no frames; skipped");
      continue;
    }
    v.frame_count = count;
    if (kind == DatasetKind::VadTest) {
      const auto label_path = root / (v.video_id + ".labels.txt");
      require<IoError>(std::filesystem::exists(label_path), "vad-test video '", v.video_id,
                       "' has no label file '", label_path.string(), "'");
      v.labels = detail::read_label_file(label_path, count);
    }
    m.videos.push_back(std::move(v));
  }
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["videos"] = nlohmann::json::array();
  for (const auto& v : m.videos) {
    nlohmann::json jv{{"video_id", v.video_id},
                      {"frame_dir", v.frame_dir.string()},
                      {"frame_count", v.frame_count}};
    if (!v.labels.empty()) jv["labels"] = v.labels;
    j["videos"].push_back(std::move(jv));
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.kind = dataset_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& jv : j.at("videos")) {
    VideoEntry v;
    v.video_id = jv.at("video_id").get<std::string>();
    v.frame_dir = jv.at("frame_dir").get<std::string>();
    v.frame_count = jv.at("frame_count").get<Index>();
    if (jv.contains("labels")) {
      v.labels = jv.at("labels").get<std::vector<int>>();
      require<IoError>(static_cast<Index>(v.labels.size()) == v.frame_count, "manifest video '",
                       v.video_id, "': label count != frame count");
    }
    m.videos.push_back(std::move(v));
  }
  return m;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require<IoError>(out.good(), "cannot write manifest '", path.string(), "'");
  out << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require<IoError>(in.good(), "cannot open manifest '", path.string(), "'");
  nlohmann::json j;
  in >> j;
  return manifest_from_json(j);
}

/// Loads frame `idx` of a video, resized to `size` and normalized to [-1, 1].
inline Frame load_frame(const VideoEntry& v, Index idx, Index size) {
  require(idx >= 0 && idx < v.frame_count, "frame index ", idx, " out of range for video '",
          v.video_id, "' with ", v.frame_count, " frames");
  Frame f;
  f.pixels = normalize_frame(load_and_resize(detail::frame_path(v, idx), size));
  f.source_id = v.video_id;
  f.index = idx;
  return f;
}

/// Frames t..t+T-1 as inputs, frame t+T as the prediction target.
inline Clip sample_clip(const VideoEntry& v, Index t, Index T, Index size) {
  require(t >= 0 && t + T < v.frame_count, "clip window [", t, ",", t + T, "] exceeds video '",
          v.video_id, "' with ", v.frame_count, " frames");
  Clip clip;
  clip.inputs.reserve(static_cast<std::size_t>(T));
  for (Index i = 0; i < T; ++i) clip.inputs.push_back(load_frame(v, t + i, size));
  clip.target = load_frame(v, t + T, size);
  return clip;
}

}  // namespace xvad
