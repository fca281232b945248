#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "xvad/core/tensor.hpp"

namespace xvad {

/// Single-archive training state: every named parameter tensor of the three
/// networks (generator incl. memory bank, discriminator, classifier, angular
/// class centres), optimizer moments, iteration counter, master seed and the
/// resolved-config hash.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::int64_t iteration = 0;
  std::uint64_t master_seed = 0;
  std::array<long long, 3> adam_steps{0, 0, 0};  // G, D, N
  std::string config_text;  // resolved flat key-value dump, for self-contained loading
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

template <typename V>
void write_pod(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::ifstream& in) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require<IoError>(out.good(), "cannot write checkpoint '", path.string(), "'");
  out.write("XVADCKP1", 8);
  detail::write_pod(out, ckpt.config_hash);
  detail::write_pod(out, ckpt.iteration);
  detail::write_pod(out, ckpt.master_seed);
  for (long long s : ckpt.adam_steps) detail::write_pod(out, s);
  detail::write_pod(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  detail::write_pod(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    detail::write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(out, static_cast<std::uint8_t>(t.shape().rank()));
    for (int i = 0; i < t.shape().rank(); ++i) detail::write_pod(out, t.shape()[i]);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  require<IoError>(out.good(), "short write on checkpoint '", path.string(), "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require<IoError>(in.good(), "cannot open checkpoint '", path.string(), "'");
  char magic[8];
  in.read(magic, 8);
  require<IoError>(in.good() && std::string(magic, 8) == "XVADCKP1", "'", path.string(),
                   "' is not a checkpoint archive");
  Checkpoint ckpt;
  ckpt.config_hash = detail::read_pod<std::uint64_t>(in);
  ckpt.iteration = detail::read_pod<std::int64_t>(in);
  ckpt.master_seed = detail::read_pod<std::uint64_t>(in);
  for (long long& s : ckpt.adam_steps) s = detail::read_pod<long long>(in);
  const auto cfg_len = detail::read_pod<std::uint32_t>(in);
  ckpt.config_text.resize(cfg_len);
  in.read(ckpt.config_text.data(), cfg_len);
  const auto count = detail::read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int rank = detail::read_pod<std::uint8_t>(in);
    require<IoError>(rank >= 1 && rank <= Shape::kMaxRank, "checkpoint tensor '", name,
                     "': bad rank ", rank);
    std::vector<Index> dims;
    Index numel = 1;
    for (int d = 0; d < rank; ++d) {
      dims.push_back(detail::read_pod<Index>(in));
      numel *= dims.back();
    }
    Shape shape;
    if (rank == 1) shape = Shape::vec(dims[0]);
    else if (rank == 2) shape = Shape::mat(dims[0], dims[1]);
    else if (rank == 3) shape = Shape{dims[0], dims[1], dims[2]};
    else shape = Shape::nchw(dims[0], dims[1], dims[2], dims[3]);
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    require<IoError>(in.good(), "checkpoint '", path.string(), "' truncated at tensor '", name, "'");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

}  // namespace xvad
