#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kvq/codebook.hpp"
#include "kvq/grid.hpp"
#include "kvq/matrix.hpp"

namespace kvq {

/// Per-code usage counts within one batch.
struct UsageHistogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;

  static UsageHistogram from_winners(std::size_t k, std::span<const std::size_t> winners);
  static UsageHistogram from_counts(std::vector<std::size_t> counts);
};

/// exp of the usage entropy (natural log, 0 ln 0 = 0). Lies in [1, K].
double perplexity(const UsageHistogram& h);

/// Fraction of codes used at least once.
double utilization(const UsageHistogram& h);

/// Trailing running mean with the given window (window 1 is the identity).
std::vector<double> running_mean(std::span<const double> values, std::size_t window);

/// Index of the first entry whose smoothed value is within (1 + margin) of
/// the final smoothed value, or nullopt when none is.
std::optional<std::size_t> steps_to_threshold(std::span<const double> losses, double margin,
                                              std::size_t window = 1);

/// Fraction of inputs whose best and second-best units are not grid
/// neighbours. threshold defaults to the grid's default neighbour distance.
double topographic_error(const Matrix& data, const Codebook& codebook, const GridTopology& grid,
                         std::optional<double> threshold = std::nullopt);

/// Mean topographic error of `draws` random relabellings of the codebook
/// over the same grid; the no-ordering reference level.
double permuted_topographic_error(const Matrix& data, const Codebook& codebook,
                                  const GridTopology& grid, std::uint64_t seed,
                                  std::size_t draws = 10);

/// Mean squared Euclidean distance from each input to its best unit.
double quantization_error(const Matrix& data, const Codebook& codebook);

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  /// Sample standard deviation (n - 1); 0 for fewer than two values.
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

SummaryStats summarize(std::span<const double> values);

}  // namespace kvq
