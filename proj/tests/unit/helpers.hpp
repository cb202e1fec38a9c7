#pragma once

#include <initializer_list>
#include <vector>

#include "kvq/matrix.hpp"
#include "kvq/rng.hpp"

namespace kvq::test {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m;
  for (auto r : values) m.push_row(std::vector<double>(r));
  return m;
}

inline Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed, 99);
  Matrix m(n, d);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    m = std::max(m, d < 0 ? -d : d);
  }
  return m;
}

}  // namespace kvq::test
