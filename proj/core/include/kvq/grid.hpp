#pragma once

#include <cstddef>
#include <vector>

namespace kvq {

/// Integer lattice coordinates of a codebook index. 1D grids use y = 0.
struct LatticePoint {
  int x = 0;
  int y = 0;
  bool operator==(const LatticePoint&) const = default;
};

/// Non-wrapping 1D or 2D rectangular lattice over codebook indices 0..K-1.
///
/// 2D indices are laid out row-major from the bottom-left node:
/// index k sits at (k mod width, k div width). A 1D grid of length L is
/// stored as width L, height 1.
class GridTopology {
 public:
  static GridTopology line(std::size_t length);
  static GridTopology rect(std::size_t width, std::size_t height);

  int dimensionality() const noexcept { return dims_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return width_ * height_; }

  LatticePoint coords(std::size_t k) const;
  /// Inverse of coords(); throws IndexError for points off the lattice.
  std::size_t index_of(LatticePoint p) const;

  double distance(std::size_t i, std::size_t j) const;
  double squared_distance(std::size_t i, std::size_t j) const;

  /// Indices j != i with distance(i, j) <= threshold, ascending.
  std::vector<std::size_t> neighbors_within(std::size_t i, double threshold) const;

  /// 1 for 1D grids, sqrt(2) for 2D grids.
  double default_threshold() const noexcept;

  bool operator==(const GridTopology&) const = default;

 private:
  GridTopology(int dims, std::size_t width, std::size_t height)
      : dims_(dims), width_(width), height_(height) {}

  void check(std::size_t k) const;

  int dims_;
  std::size_t width_;
  std::size_t height_;
};

}  // namespace kvq
