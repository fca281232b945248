#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>

#include "xvad/core/error.hpp"

namespace xvad {

using Index = std::int64_t;

/// Dense tensor extents, rank 0..4. Rank-4 tensors follow the NCHW convention.
class Shape {
 public:
  static constexpr int kMaxRank = 4;

  Shape() = default;

  Shape(std::initializer_list<Index> dims) {
    require(dims.size() <= kMaxRank, "shape rank ", dims.size(), " exceeds ", kMaxRank);
    for (Index d : dims) {
      require(d >= 0, "negative shape extent ", d);
      d_[rank_++] = d;
    }
  }

  static Shape scalar() { return Shape{1}; }
  static Shape vec(Index n) { return Shape{n}; }
  static Shape mat(Index r, Index c) { return Shape{r, c}; }
  static Shape nchw(Index n, Index c, Index h, Index w) { return Shape{n, c, h, w}; }

  int rank() const { return rank_; }

  Index operator[](int i) const {
    require(i >= 0 && i < rank_, "shape axis ", i, " out of range for rank ", rank_);
    return d_[i];
  }

  Index numel() const {
    Index n = 1;
    for (int i = 0; i < rank_; ++i) n *= d_[i];
    return rank_ == 0 ? 0 : n;
  }

  bool operator==(const Shape& o) const {
    if (rank_ != o.rank_) return false;
    for (int i = 0; i < rank_; ++i)
      if (d_[i] != o.d_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank_; ++i) {
      if (i) s += "x";
      s += std::to_string(d_[i]);
    }
    return s + "]";
  }

 private:
  std::array<Index, kMaxRank> d_{};
  int rank_ = 0;
};

}  // namespace xvad
