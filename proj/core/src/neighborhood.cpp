#include "kvq/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kvq/error.hpp"

namespace kvq {

std::string_view to_string(NeighborhoodKind kind) {
  switch (kind) {
    case NeighborhoodKind::identity:
      return "identity";
    case NeighborhoodKind::hard:
      return "hard";
    case NeighborhoodKind::gaussian:
      return "gaussian";
  }
  return "?";
}

NeighborhoodKind parse_neighborhood_kind(std::string_view text) {
  if (text == "identity") return NeighborhoodKind::identity;
  if (text == "hard") return NeighborhoodKind::hard;
  if (text == "gaussian") return NeighborhoodKind::gaussian;
  throw ConfigError("unknown neighborhood '" + std::string(text) +
                    "' (expected identity|hard|gaussian)");
}

NeighborhoodSchedule::NeighborhoodSchedule(NeighborhoodKind kind, GridTopology grid, double tau,
                                           std::optional<double> threshold)
    : kind_(kind),
      grid_(grid),
      tau_(tau),
      threshold_(threshold.value_or(grid.default_threshold())) {
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ConfigError("tau must be positive and finite");
  if (!(threshold_ >= 0.0)) throw ConfigError("grid threshold must be nonnegative");
  if (kind_ == NeighborhoodKind::hard) {
    support_.resize(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      auto& s = support_[i];
      s = grid_.neighbors_within(i, threshold_);
      s.insert(std::lower_bound(s.begin(), s.end(), i), i);
    }
  }
}

double NeighborhoodSchedule::coefficient(std::size_t i, std::size_t j, std::uint64_t t) const {
  const double d2 = grid_.squared_distance(i, j);  // validates both indices
  if (i == j) return 1.0;
  switch (kind_) {
    case NeighborhoodKind::identity:
      return 0.0;
    case NeighborhoodKind::hard:
      return d2 <= threshold_ * threshold_ ? shrink(t) : 0.0;
    case NeighborhoodKind::gaussian:
      // sigma^2 = 1/(1 + t*tau), so dividing by sigma^2 multiplies by (1 + t*tau).
      return std::exp(-d2 * (1.0 + static_cast<double>(t) * tau_));
  }
  return 0.0;
}

Matrix NeighborhoodSchedule::matrix(std::uint64_t t) const {
  const std::size_t k = size();
  Matrix a(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) a(i, j) = coefficient(i, j, t);
  }
  return a;
}

}  // namespace kvq
