#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "kvq/grid.hpp"
#include "kvq/matrix.hpp"

namespace kvq {

enum class NeighborhoodKind { identity, hard, gaussian };

std::string_view to_string(NeighborhoodKind kind);
NeighborhoodKind parse_neighborhood_kind(std::string_view text);

/// Time-dependent neighbourhood coefficients A(t) over a grid.
///
///   identity: A = I
///   hard:     1 on the diagonal, 1/(1 + t*tau) within the grid threshold, else 0
///   gaussian: exp(-dist^2 / sigma(t)^2) with sigma(t)^2 = 1/(1 + t*tau)
///
/// t counts codebook updates performed so far. Coefficients are computed on
/// demand; hard schedules keep a precomputed neighbour list per node.
class NeighborhoodSchedule {
 public:
  /// threshold defaults to grid.default_threshold(); only hard uses it.
  NeighborhoodSchedule(NeighborhoodKind kind, GridTopology grid, double tau,
                       std::optional<double> threshold = std::nullopt);

  static NeighborhoodSchedule identity(GridTopology grid) {
    return {NeighborhoodKind::identity, grid, 1.0};
  }

  NeighborhoodKind kind() const noexcept { return kind_; }
  const GridTopology& grid() const noexcept { return grid_; }
  double tau() const noexcept { return tau_; }
  double threshold() const noexcept { return threshold_; }
  std::size_t size() const noexcept { return grid_.size(); }

  double coefficient(std::size_t i, std::size_t j, std::uint64_t t) const;

  /// Dense K x K table of coefficient(i, j, t).
  Matrix matrix(std::uint64_t t) const;

  /// Calls fn(j, coefficient(i, j, t)) for every j that can carry a nonzero
  /// coefficient, in ascending j. Identity visits only i; hard visits i and
  /// its grid neighbours; gaussian visits every node.
  template <typename Fn>
  void for_each_support(std::size_t i, std::uint64_t t, Fn&& fn) const {
    switch (kind_) {
      case NeighborhoodKind::identity:
        fn(i, 1.0);
        return;
      case NeighborhoodKind::hard: {
        const double off = shrink(t);
        for (std::size_t j : support_[i]) fn(j, j == i ? 1.0 : off);
        return;
      }
      case NeighborhoodKind::gaussian:
        for (std::size_t j = 0; j < size(); ++j) fn(j, coefficient(i, j, t));
        return;
    }
  }

 private:
  double shrink(std::uint64_t t) const { return 1.0 / (1.0 + static_cast<double>(t) * tau_); }

  NeighborhoodKind kind_;
  GridTopology grid_;
  double tau_;
  double threshold_;
  // Hard kind only: for each node, itself plus its neighbours, ascending.
  std::vector<std::vector<std::size_t>> support_;
};

}  // namespace kvq
