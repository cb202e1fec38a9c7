#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "kvq/matrix.hpp"

namespace kvq {

enum class Metric : std::uint32_t { euclidean = 0, negative_dot = 1 };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

enum class InitScheme { gaussian, data_sample };

std::string_view to_string(InitScheme scheme);
InitScheme parse_init_scheme(std::string_view text);

/// Winners and cluster membership for one batch of inputs.
struct AssignmentBatch {
  std::vector<std::size_t> winners;
  /// members[k] lists input indices assigned to k, ascending.
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> counts;
};

/// K prototype vectors of dimension d with a best-matching-unit search.
///
/// Euclidean search compares squared distances. Negative-dot search picks
/// the largest inner product. Ties always resolve to the lowest index.
class Codebook {
 public:
  explicit Codebook(Matrix weights, Metric metric = Metric::euclidean);

  /// Entries i.i.d. N(offset, scale^2).
  static Codebook gaussian(std::size_t k, std::size_t d, std::uint64_t seed, double scale = 1.0,
                           double offset = 0.0, Metric metric = Metric::euclidean);
  /// K distinct rows of data, drawn without replacement.
  static Codebook sample_from(const Matrix& data, std::size_t k, std::uint64_t seed,
                              Metric metric = Metric::euclidean);

  std::size_t size() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  Metric metric() const noexcept { return metric_; }

  const Matrix& weights() const noexcept { return weights_; }
  Matrix& weights() noexcept { return weights_; }
  std::span<const double> prototype(std::size_t k) const { return weights_.row(k); }

  std::size_t best_matching_unit(std::span<const double> x) const;
  /// Best and second-best units (same tie rule); requires size() >= 2.
  std::pair<std::size_t, std::size_t> best_two(std::span<const double> x) const;

  AssignmentBatch assign(const Matrix& inputs) const;

  bool operator==(const Codebook&) const = default;

 private:
  double score(std::span<const double> x, std::size_t k) const;
  void check_dim(std::span<const double> x) const;

  Matrix weights_;
  Metric metric_;
};

/// Dispatches to Codebook::gaussian or Codebook::sample_from. data is only
/// read for the data-sample scheme.
Codebook init_codebook(std::size_t k, std::size_t d, std::uint64_t seed, InitScheme scheme,
                       const Matrix* data = nullptr, double scale = 1.0, double offset = 0.0,
                       Metric metric = Metric::euclidean);

}  // namespace kvq
