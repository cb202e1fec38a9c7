#include "kvq/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "kvq/error.hpp"

namespace kvq {

GridTopology GridTopology::line(std::size_t length) {
  if (length == 0) throw ConfigError("grid length must be positive");
  return GridTopology(1, length, 1);
}

GridTopology GridTopology::rect(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw ConfigError("grid extents must be positive");
  return GridTopology(2, width, height);
}

void GridTopology::check(std::size_t k) const {
  if (k >= size()) {
    throw IndexError("codebook index " + std::to_string(k) + " out of range [0, " +
                     std::to_string(size()) + ")");
  }
}

LatticePoint GridTopology::coords(std::size_t k) const {
  check(k);
  return {static_cast<int>(k % width_), static_cast<int>(k / width_)};
}

std::size_t GridTopology::index_of(LatticePoint p) const {
  if (p.x < 0 || p.y < 0 || static_cast<std::size_t>(p.x) >= width_ ||
      static_cast<std::size_t>(p.y) >= height_) {
    throw IndexError("lattice point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                     ") outside grid");
  }
  return static_cast<std::size_t>(p.y) * width_ + static_cast<std::size_t>(p.x);
}

double GridTopology::squared_distance(std::size_t i, std::size_t j) const {
  const LatticePoint a = coords(i);
  const LatticePoint b = coords(j);
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

double GridTopology::distance(std::size_t i, std::size_t j) const {
  return std::sqrt(squared_distance(i, j));
}

std::vector<std::size_t> GridTopology::neighbors_within(std::size_t i, double threshold) const {
  check(i);
  std::vector<std::size_t> out;
  if (threshold < 0.0) return out;
  // Compare squared values; sqrt(2)^2 rounds to 2.0000000000000004, which
  // still admits diagonal neighbours at squared distance 2.
  const double limit = threshold * threshold;
  for (std::size_t j = 0; j < size(); ++j) {
    if (j != i && squared_distance(i, j) <= limit) out.push_back(j);
  }
  return out;
}

double GridTopology::default_threshold() const noexcept {
  return dims_ == 1 ? 1.0 : std::numbers::sqrt2;
}

}  // namespace kvq
