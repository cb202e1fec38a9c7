#include "kvq/codebook.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "kvq/error.hpp"
#include "kvq/rng.hpp"

namespace kvq {

namespace {
constexpr std::uint64_t kInitStream = 0x636f6465;  // "code"
}

std::string_view to_string(Metric metric) {
  return metric == Metric::euclidean ? "euclidean" : "negative-dot";
}

Metric parse_metric(std::string_view text) {
  if (text == "euclidean") return Metric::euclidean;
  if (text == "negative-dot") return Metric::negative_dot;
  throw ConfigError("unknown metric '" + std::string(text) + "'");
}

std::string_view to_string(InitScheme scheme) {
  return scheme == InitScheme::gaussian ? "gaussian" : "data-sample";
}

InitScheme parse_init_scheme(std::string_view text) {
  if (text == "gaussian") return InitScheme::gaussian;
  if (text == "data-sample") return InitScheme::data_sample;
  throw ConfigError("unknown codebook init '" + std::string(text) + "'");
}

Codebook::Codebook(Matrix weights, Metric metric) : weights_(std::move(weights)), metric_(metric) {
  if (weights_.rows() == 0 || weights_.cols() == 0) {
    throw ShapeError("codebook needs K >= 1 and d >= 1");
  }
  for (double v : weights_.values()) {
    if (!std::isfinite(v)) throw InputError("codebook weights must be finite");
  }
}

Codebook Codebook::gaussian(std::size_t k, std::size_t d, std::uint64_t seed, double scale,
                            double offset, Metric metric) {
  if (k == 0 || d == 0) throw ConfigError("codebook needs K >= 1 and d >= 1");
  Rng rng(seed, kInitStream);
  Matrix w(k, d);
  for (double& v : w.values()) v = offset + scale * rng.normal();
  return Codebook(std::move(w), metric);
}

Codebook Codebook::sample_from(const Matrix& data, std::size_t k, std::uint64_t seed,
                               Metric metric) {
  if (k == 0) throw ConfigError("codebook needs K >= 1");
  if (data.rows() < k) {
    throw ConfigError("data-sample init needs at least " + std::to_string(k) +
                      " vectors, got " + std::to_string(data.rows()));
  }
  // Partial Fisher-Yates over row indices.
  Rng rng(seed, kInitStream);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix w(k, data.cols());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t pick = i + rng.below(order.size() - i);
    std::swap(order[i], order[pick]);
    const auto src = data.row(order[i]);
    std::copy(src.begin(), src.end(), w.row(i).begin());
  }
  return Codebook(std::move(w), metric);
}

void Codebook::check_dim(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw ShapeError("input dimension " + std::to_string(x.size()) +
                     " does not match codebook dimension " + std::to_string(dim()));
  }
}

double Codebook::score(std::span<const double> x, std::size_t k) const {
  return metric_ == Metric::euclidean ? squared_distance(x, weights_.row(k))
                                      : -dot(x, weights_.row(k));
}

std::size_t Codebook::best_matching_unit(std::span<const double> x) const {
  check_dim(x);
  std::size_t best = 0;
  double best_score = score(x, 0);
  for (std::size_t k = 1; k < size(); ++k) {
    const double s = score(x, k);
    if (s < best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

std::pair<std::size_t, std::size_t> Codebook::best_two(std::span<const double> x) const {
  check_dim(x);
  if (size() < 2) throw UndefinedError("second-best unit needs K >= 2");
  std::size_t first = 0;
  std::size_t second = 1;
  double s_first = score(x, 0);
  double s_second = score(x, 1);
  if (s_second < s_first) {
    std::swap(first, second);
    std::swap(s_first, s_second);
  }
  for (std::size_t k = 2; k < size(); ++k) {
    const double s = score(x, k);
    if (s < s_first) {
      second = first;
      s_second = s_first;
      first = k;
      s_first = s;
    } else if (s < s_second) {
      second = k;
      s_second = s;
    }
  }
  return {first, second};
}

AssignmentBatch Codebook::assign(const Matrix& inputs) const {
  AssignmentBatch out;
  out.members.resize(size());
  out.counts.assign(size(), 0);
  if (inputs.rows() == 0) return out;
  out.winners.resize(inputs.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const std::size_t k = best_matching_unit(inputs.row(i));
    out.winners[i] = k;
    out.members[k].push_back(i);
    ++out.counts[k];
  }
  return out;
}

Codebook init_codebook(std::size_t k, std::size_t d, std::uint64_t seed, InitScheme scheme,
                       const Matrix* data, double scale, double offset, Metric metric) {
  if (scheme == InitScheme::gaussian) return Codebook::gaussian(k, d, seed, scale, offset, metric);
  if (data == nullptr) throw ConfigError("data-sample init needs a data batch");
  if (data->cols() != d) throw ShapeError("data-sample batch has the wrong dimension");
  return Codebook::sample_from(*data, k, seed, metric);
}

}  // namespace kvq
