#include "kvq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kvq/error.hpp"
#include "kvq/rng.hpp"

namespace kvq {

UsageHistogram UsageHistogram::from_winners(std::size_t k, std::span<const std::size_t> winners) {
  UsageHistogram h;
  h.counts.assign(k, 0);
  for (std::size_t w : winners) {
    if (w >= k) throw IndexError("winner index out of range");
    ++h.counts[w];
  }
  h.total = winners.size();
  return h;
}

UsageHistogram UsageHistogram::from_counts(std::vector<std::size_t> counts) {
  UsageHistogram h;
  h.total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  h.counts = std::move(counts);
  return h;
}

double perplexity(const UsageHistogram& h) {
  if (h.total == 0) throw UndefinedError("perplexity of an empty histogram");
  const double total = static_cast<double>(h.total);
  double entropy = 0.0;
  for (std::size_t c : h.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double utilization(const UsageHistogram& h) {
  if (h.counts.empty()) return 0.0;
  const auto used = std::count_if(h.counts.begin(), h.counts.end(),
                                  [](std::size_t c) { return c > 0; });
  return static_cast<double>(used) / static_cast<double>(h.counts.size());
}

std::vector<double> running_mean(std::span<const double> values, std::size_t window) {
  if (window == 0) window = 1;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += values[j];
    out[i] = s / static_cast<double>(i + 1 - lo);
  }
  return out;
}

std::optional<std::size_t> steps_to_threshold(std::span<const double> losses, double margin,
                                              std::size_t window) {
  if (losses.empty()) throw UndefinedError("steps_to_threshold needs a nonempty trace");
  const std::vector<double> smooth = running_mean(losses, window);
  const double target = (1.0 + margin) * smooth.back();
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    if (smooth[i] <= target) return i;
  }
  return std::nullopt;
}

double topographic_error(const Matrix& data, const Codebook& codebook, const GridTopology& grid,
                         std::optional<double> threshold) {
  if (codebook.size() < 2) throw UndefinedError("topographic error needs K >= 2");
  if (grid.size() != codebook.size()) throw ConfigError("grid and codebook sizes differ");
  if (data.rows() == 0) throw UndefinedError("topographic error of an empty sample");
  const double limit = threshold.value_or(grid.default_threshold());
  const double limit2 = limit * limit;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto [first, second] = codebook.best_two(data.row(i));
    if (grid.squared_distance(first, second) > limit2) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(data.rows());
}

double permuted_topographic_error(const Matrix& data, const Codebook& codebook,
                                  const GridTopology& grid, std::uint64_t seed,
                                  std::size_t draws) {
  Rng rng(seed, 0x7065726d);  // "perm"
  const std::size_t k = codebook.size();
  double total = 0.0;
  for (std::size_t draw = 0; draw < draws; ++draw) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = k - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    Matrix w(k, codebook.dim());
    for (std::size_t i = 0; i < k; ++i) {
      const auto src = codebook.prototype(order[i]);
      std::copy(src.begin(), src.end(), w.row(i).begin());
    }
    total += topographic_error(data, Codebook(std::move(w), codebook.metric()), grid);
  }
  return total / static_cast<double>(draws);
}

double quantization_error(const Matrix& data, const Codebook& codebook) {
  if (data.rows() == 0) throw UndefinedError("quantization error of an empty sample");
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto x = data.row(i);
    total += squared_distance(x, codebook.prototype(codebook.best_matching_unit(x)));
  }
  return total / static_cast<double>(data.rows());
}

SummaryStats summarize(std::span<const double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  const std::size_t n = sorted.size();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(n - 1));
  }
  return s;
}

}  // namespace kvq
