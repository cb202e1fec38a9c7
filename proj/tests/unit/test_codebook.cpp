#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

#include "helpers.hpp"
#include "kvq/codebook.hpp"
#include "kvq/error.hpp"

using namespace kvq;
using kvq::test::rows;

namespace {

// Exhaustive scan, lowest index on ties.
std::size_t brute_bmu(const Matrix& w, std::span<const double> x, Metric metric) {
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w.rows(); ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
      s += metric == Metric::euclidean ? (x[c] - w(k, c)) * (x[c] - w(k, c)) : -x[c] * w(k, c);
    }
    if (s < best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST(Codebook, NearestPrototype) {
  const Codebook cb(rows({{0, 0}, {1, 0}}));
  EXPECT_EQ(cb.best_matching_unit(std::vector<double>{0.9, 0}), 1u);
  EXPECT_EQ(cb.best_matching_unit(std::vector<double>{0.5, 0}), 0u);
}

TEST(Codebook, NegativeDot) {
  const Codebook cb(rows({{1, 0}, {0, 2}}), Metric::negative_dot);
  EXPECT_EQ(cb.best_matching_unit(std::vector<double>{1, 1}), 1u);
}

TEST(Codebook, TiesGoToTheLowestIndex) {
  const Codebook cb(rows({{3, 3}, {1, 1}, {2, 2}, {1, 1}}));
  EXPECT_EQ(cb.best_matching_unit(std::vector<double>{1, 1}), 1u);
  const Codebook swapped(rows({{1, 1}, {3, 3}, {2, 2}, {1, 1}}));
  EXPECT_EQ(swapped.best_matching_unit(std::vector<double>{1, 1}), 0u);
  const auto [a, b] = cb.best_two(std::vector<double>{1, 1});
  EXPECT_EQ(a, 1u);
  EXPECT_EQ(b, 3u);
}

TEST(Codebook, AgreesWithExhaustiveScan) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t k = 1 + seed % 32, d = 1 + seed % 8;
    for (auto metric : {Metric::euclidean, Metric::negative_dot}) {
      const Codebook cb(test::random_matrix(k, d, seed), metric);
      const Matrix x = test::random_matrix(100, d, seed + 1000);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        EXPECT_EQ(cb.best_matching_unit(x.row(i)), brute_bmu(cb.weights(), x.row(i), metric));
      }
    }
  }
}

TEST(Codebook, EuclideanWinnerIsTranslationInvariant) {
  const Matrix w = test::random_matrix(16, 3, 5);
  const Matrix x = test::random_matrix(50, 3, 6);
  Matrix w2 = w, x2 = x;
  for (std::size_t k = 0; k < w2.rows(); ++k) w2(k, 0) += 0.25, w2(k, 2) -= 0.5;
  for (std::size_t i = 0; i < x2.rows(); ++i) x2(i, 0) += 0.25, x2(i, 2) -= 0.5;
  EXPECT_EQ(Codebook(w).assign(x).winners, Codebook(w2).assign(x2).winners);
}

TEST(Codebook, AssignPartitionsTheBatch) {
  const Codebook cb(test::random_matrix(8, 2, 1));
  const Matrix x = test::random_matrix(64, 2, 2);
  const auto a = cb.assign(x);
  std::size_t total = 0;
  std::vector<int> seen(64, 0);
  for (std::size_t k = 0; k < 8; ++k) {
    total += a.counts[k];
    EXPECT_EQ(a.members[k].size(), a.counts[k]);
    EXPECT_TRUE(std::is_sorted(a.members[k].begin(), a.members[k].end()));
    for (std::size_t i : a.members[k]) {
      ++seen[i];
      EXPECT_EQ(a.winners[i], k);
      EXPECT_EQ(k, brute_bmu(cb.weights(), x.row(i), Metric::euclidean));
    }
  }
  EXPECT_EQ(total, 64u);
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST(Codebook, SingleAndDuplicateInputs) {
  const Codebook cb(test::random_matrix(5, 2, 3));
  const auto one = cb.assign(rows({{0.2, -0.1}}));
  EXPECT_EQ(one.members[one.winners[0]], (std::vector<std::size_t>{0}));
  const auto dup = cb.assign(rows({{0.2, -0.1}, {0.2, -0.1}}));
  EXPECT_EQ(dup.winners[0], dup.winners[1]);
  const auto none = cb.assign(Matrix(0, 2));
  EXPECT_TRUE(none.winners.empty());
  EXPECT_EQ(none.counts, std::vector<std::size_t>(5, 0));
}

TEST(Codebook, ShapeAndValueChecks) {
  const Codebook cb(rows({{0, 0}, {1, 0}}));
  EXPECT_THROW(cb.best_matching_unit(std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Codebook(Matrix(0, 2)), ShapeError);
  EXPECT_THROW(Codebook(rows({{0, std::numeric_limits<double>::quiet_NaN()}})), InputError);
  EXPECT_THROW(Codebook(rows({{1, 1}})).best_two(std::vector<double>{0, 0}), UndefinedError);
}

TEST(Codebook, GaussianInitIsDeterministicAndFinite) {
  const auto a = Codebook::gaussian(512, 64, 7);
  EXPECT_EQ(a, Codebook::gaussian(512, 64, 7));
  EXPECT_NE(a, Codebook::gaussian(512, 64, 8));
  EXPECT_EQ(a.size(), 512u);
  EXPECT_EQ(a.dim(), 64u);
  double sum = 0.0, sq = 0.0;
  for (double v : a.weights().values()) {
    ASSERT_TRUE(std::isfinite(v));
    sum += v;
    sq += v * v;
  }
  const double n = 512.0 * 64.0;
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.03);
}

TEST(Codebook, GaussianScaleAndOffset) {
  const auto base = Codebook::gaussian(10, 3, 4);
  const auto moved = Codebook::gaussian(10, 3, 4, 2.0, 5.0);
  for (std::size_t i = 0; i < base.weights().size(); ++i)
    EXPECT_DOUBLE_EQ(moved.weights().values()[i], 5.0 + 2.0 * base.weights().values()[i]);
}

TEST(Codebook, DataSampleIsAPermutationOfAFullBatch) {
  const Matrix data = test::random_matrix(12, 3, 11);
  const auto cb = Codebook::sample_from(data, 12, 5);
  std::vector<std::vector<double>> a, b;
  for (std::size_t i = 0; i < 12; ++i) {
    a.emplace_back(data.row(i).begin(), data.row(i).end());
    b.emplace_back(cb.prototype(i).begin(), cb.prototype(i).end());
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(cb, Codebook::sample_from(data, 12, 5));
}

TEST(Codebook, DataSampleDrawsWithoutReplacement) {
  Matrix data(40, 1);
  for (std::size_t i = 0; i < 40; ++i) data(i, 0) = static_cast<double>(i);
  const auto cb = Codebook::sample_from(data, 25, 9);
  std::vector<double> v(cb.weights().values().begin(), cb.weights().values().end());
  std::sort(v.begin(), v.end());
  EXPECT_EQ(std::adjacent_find(v.begin(), v.end()), v.end());
  EXPECT_THROW(Codebook::sample_from(data, 41, 9), ConfigError);
}

TEST(Codebook, InitDispatch) {
  const Matrix data = test::random_matrix(20, 2, 1);
  EXPECT_EQ(init_codebook(4, 2, 3, InitScheme::gaussian), Codebook::gaussian(4, 2, 3));
  EXPECT_EQ(init_codebook(4, 2, 3, InitScheme::data_sample, &data), Codebook::sample_from(data, 4, 3));
  EXPECT_THROW(init_codebook(4, 2, 3, InitScheme::data_sample), ConfigError);
  EXPECT_EQ(parse_init_scheme("data-sample"), InitScheme::data_sample);
  EXPECT_EQ(parse_metric("negative-dot"), Metric::negative_dot);
}
