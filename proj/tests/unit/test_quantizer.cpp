#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "../common/oracle_kmeans.hpp"
#include "helpers.hpp"
#include "kvq/data.hpp"
#include "kvq/error.hpp"
#include "kvq/quantizer.hpp"

using namespace kvq;
using kvq::test::rows;

namespace {

Quantizer make(const Matrix& w, Algorithm alg, NeighborhoodSchedule s, EmaParams p = {},
               Metric metric = Metric::euclidean) {
  return Quantizer(Codebook(w, metric), QuantizerConfig{alg, std::move(s), p});
}

NeighborhoodSchedule identity(std::size_t k) {
  return NeighborhoodSchedule::identity(GridTopology::line(k));
}

}  // namespace

// --- online ---------------------------------------------------------------------

TEST(OnlineKsom, IdentityMovesOnlyTheWinnerHalfway) {
  auto q = make(rows({{0, 0}, {5, 5}}), Algorithm::ksom_online, identity(2), {0.5});
  q.online_ksom_step(std::vector<double>{1, 0});
  EXPECT_EQ(q.codebook().weights(), rows({{0.5, 0}, {5, 5}}));
  EXPECT_EQ(q.step_count(), 1u);
}

TEST(OnlineKsom, BetaOneOverwrites) {
  auto q = make(rows({{0, 0}, {5, 5}}), Algorithm::ksom_online, identity(2), {1.0});
  q.online_ksom_step(std::vector<double>{0.3, -2});
  EXPECT_EQ(q.codebook().weights(), rows({{0.3, -2}, {5, 5}}));
}

TEST(OnlineKsom, NeighbourGetsTheFullStepAtTimeZero) {
  const auto grid = GridTopology::rect(2, 2);
  auto q = make(rows({{0, 0}, {4, 0}, {0, 4}, {4, 4}}), Algorithm::ksom_online,
                NeighborhoodSchedule(NeighborhoodKind::hard, grid, 0.1), {0.5});
  q.online_ksom_step(std::vector<double>{1, 1});
  // Every node of a 2x2 grid neighbours node 0 under sqrt(2).
  EXPECT_EQ(q.codebook().weights(), rows({{0.5, 0.5}, {2.5, 0.5}, {0.5, 2.5}, {2.5, 2.5}}));
  // t = 1: off-diagonal coefficient 1/1.1.
  q.online_ksom_step(std::vector<double>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(q.codebook().weights()(1, 0), 2.5 + 0.5 * (1 / 1.1) * (0.5 - 2.5));
}

TEST(OnlineKsom, IdentityIsMacQueenWithConstantRate) {
  const Matrix w0 = test::random_matrix(6, 3, 1);
  const Matrix x = test::random_matrix(200, 3, 2);
  auto q = make(w0, Algorithm::ksom_online, identity(6), {0.05});
  Matrix ref = w0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    q.online_ksom_step(x.row(i));
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 6; ++k) {
      const double dist = squared_distance(ref.row(k), x.row(i));
      if (dist < bd) bd = dist, best = k;
    }
    for (std::size_t c = 0; c < 3; ++c) ref(best, c) += 0.05 * (x(i, c) - ref(best, c));
  }
  EXPECT_EQ(q.codebook().weights(), ref);
}

TEST(OnlineKsom, StepProcessesRowsInOrder) {
  const Matrix w0 = test::random_matrix(9, 2, 3);
  const Matrix x = test::random_matrix(20, 2, 4);
  const auto sched = NeighborhoodSchedule(NeighborhoodKind::hard, GridTopology::rect(3, 3), 0.2);
  auto a = make(w0, Algorithm::ksom_online, sched, {0.1});
  auto b = make(w0, Algorithm::ksom_online, sched, {0.1});
  a.step(x);
  for (std::size_t i = 0; i < x.rows(); ++i) b.online_ksom_step(x.row(i));
  EXPECT_EQ(a.codebook(), b.codebook());
  EXPECT_EQ(a.step_count(), 20u);
}

TEST(OnlineKsom, RejectsNonFiniteInput) {
  auto q = make(rows({{0, 0}}), Algorithm::ksom_online, identity(1));
  EXPECT_THROW(q.online_ksom_step(std::vector<double>{std::nan(""), 0}), InputError);
}

// --- matrix form ------------------------------------------------------------------

TEST(MatrixForm, MatchesOnlineUnderIdentity) {
  const Matrix w0 = test::random_matrix(10, 4, 5);
  const Matrix x = test::random_matrix(100, 4, 6);
  auto a = make(w0, Algorithm::ksom_online, identity(10), {0.1}, Metric::negative_dot);
  auto b = make(w0, Algorithm::ksom_online, identity(10), {0.1}, Metric::negative_dot);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    a.matrix_form_step(x.row(i));
    b.online_ksom_step(x.row(i));
  }
  EXPECT_EQ(test::max_abs_diff(a.codebook().weights(), b.codebook().weights()), 0.0);
}

TEST(MatrixForm, NeighbourRowsMoveByTheWinnerResidual) {
  // W^T y is the winner's prototype, so with a nonzero neighbourhood every
  // neighbour moves along (x - w_winner), not along (x - w_k).
  const auto grid = GridTopology::line(3);
  auto q = make(rows({{1, 0}, {0, 1}, {-1, 0}}), Algorithm::ksom_online,
                NeighborhoodSchedule(NeighborhoodKind::hard, grid, 0.1), {0.5}, Metric::negative_dot);
  q.matrix_form_step(std::vector<double>{2, 0});  // winner 0, neighbour 1
  EXPECT_EQ(q.codebook().weights(), rows({{1.5, 0}, {0.5, 1}, {-1, 0}}));

  auto online = make(rows({{1, 0}, {0, 1}, {-1, 0}}), Algorithm::ksom_online,
                     NeighborhoodSchedule(NeighborhoodKind::hard, grid, 0.1), {0.5},
                     Metric::negative_dot);
  online.online_ksom_step(std::vector<double>{2, 0});
  EXPECT_EQ(online.codebook().weights(), rows({{1.5, 0}, {1, 0.5}, {-1, 0}}));
}

TEST(MatrixForm, NeedsNegativeDot) {
  auto q = make(rows({{1, 0}}), Algorithm::ksom_online, identity(1));
  EXPECT_THROW(q.matrix_form_step(std::vector<double>{1, 1}), ConfigError);
}

// --- batch ------------------------------------------------------------------------

TEST(BatchKsom, ClusterMean) {
  auto q = make(rows({{0}, {10}}), Algorithm::ksom_batch, identity(2));
  q.batch_ksom_step(rows({{0}, {1}}));
  EXPECT_EQ(q.codebook().weights(), rows({{0.5}, {10}}));
}

TEST(BatchKsom, HardNeighbourhoodOnThreeNodes) {
  // Nodes 0-1-2 on a line, t = 0 so neighbours weigh 1.
  auto q = make(rows({{0}, {5}, {10}}), Algorithm::ksom_batch,
                NeighborhoodSchedule(NeighborhoodKind::hard, GridTopology::line(3), 0.1));
  q.batch_ksom_step(rows({{-1}, {1}, {4}, {6}, {9}, {12}}));
  // clusters: {-1,1}, {4,6}, {9,12}
  EXPECT_DOUBLE_EQ(q.codebook().weights()(0, 0), (0.0 + 10.0) / 4.0);
  EXPECT_DOUBLE_EQ(q.codebook().weights()(1, 0), (0.0 + 10.0 + 21.0) / 6.0);
  EXPECT_DOUBLE_EQ(q.codebook().weights()(2, 0), (10.0 + 21.0) / 4.0);
}

TEST(BatchKsom, IdentityIsLloyd) {
  const Matrix x = test::random_matrix(200, 2, 7);
  Matrix ref = test::random_matrix(8, 2, 8);
  auto q = make(ref, Algorithm::ksom_batch, identity(8));
  for (int it = 0; it < 20; ++it) {
    const auto labels = oracle::lloyd_iteration(ref, x);
    const auto a = q.batch_ksom_step(x);
    ASSERT_EQ(a.winners, labels) << "iteration " << it;
    ASSERT_EQ(q.codebook().weights(), ref) << "iteration " << it;
  }
}

TEST(BatchKsom, EmptyClusterKeepsItsWeight) {
  auto q = make(rows({{0}, {100}}), Algorithm::ksom_batch, identity(2));
  q.batch_ksom_step(rows({{1}, {2}}));
  EXPECT_EQ(q.codebook().weights()(1, 0), 100.0);
}

TEST(BatchKsom, UpdatesStayInsideTheDataRange) {
  const auto sched = NeighborhoodSchedule(NeighborhoodKind::gaussian, GridTopology::rect(4, 4), 0.1);
  auto q = make(test::random_matrix(16, 2, 9, 3.0), Algorithm::ksom_batch, sched);
  for (int it = 0; it < 5; ++it) {
    const Matrix x = test::random_matrix(50, 2, 100 + it);
    q.batch_ksom_step(x);
    for (std::size_t c = 0; c < 2; ++c) {
      double lo = x(0, c), hi = x(0, c);
      for (std::size_t i = 0; i < x.rows(); ++i) lo = std::min(lo, x(i, c)), hi = std::max(hi, x(i, c));
      for (std::size_t k = 0; k < 16; ++k) {
        EXPECT_GE(q.codebook().weights()(k, c), lo - 1e-12);
        EXPECT_LE(q.codebook().weights()(k, c), hi + 1e-12);
      }
    }
  }
}

// --- EMA ----------------------------------------------------------------------------

TEST(EmaVq, HandEvaluatedStep) {
  auto q = make(rows({{1, 0}}), Algorithm::ema_vq, identity(1), {0.01, 1, true, 1e-5});
  q.ema_vq_step(rows({{2, 0}}));
  EXPECT_DOUBLE_EQ(q.ema().sums(0, 0), 1.01);
  EXPECT_DOUBLE_EQ(q.ema().counts[0], 1.0);
  EXPECT_NEAR(q.codebook().weights()(0, 0), 1.01, 1e-12);
  EXPECT_EQ(q.codebook().weights()(0, 1), 0.0);
}

TEST(EmaVq, BetaOneWithOneMemberCopiesIt) {
  auto q = make(rows({{7, 7}}), Algorithm::ema_vq, identity(1), {1.0, 1, true, 1e-5});
  q.ema_vq_step(rows({{0.25, -3}}));
  EXPECT_EQ(q.codebook().weights(), rows({{0.25, -3}}));
}

TEST(EmaVq, BetaOneOnLargerCodebookIsCloseToTheMember) {
  auto q = make(rows({{0, 0}, {9, 9}, {-9, 9}}), Algorithm::ema_vq, identity(3), {1.0, 1, true, 1e-5});
  q.ema_vq_step(rows({{0.5, -0.5}}));
  EXPECT_NEAR(q.codebook().weights()(0, 0), 0.5, 1e-4);
  EXPECT_NEAR(q.codebook().weights()(0, 1), -0.5, 1e-4);
}

TEST(EmaVq, EmptyClusterUntouchedWithoutUpdateEmpty) {
  auto q = make(rows({{0, 0}, {50, 50}}), Algorithm::ema_vq, identity(2), {0.1, 0, false, 1e-5});
  q.ema_vq_step(rows({{1, 1}, {-1, 1}}));
  EXPECT_EQ(q.codebook().weights()(1, 0), 50.0);
  EXPECT_EQ(q.ema().counts[1], 0.0);
  EXPECT_EQ(q.ema().sums(1, 0), 50.0);
}

TEST(EmaVq, EmptyClusterAtNInitZeroIsMagnified) {
  auto q = make(rows({{0, 0}, {50, 50}}), Algorithm::ema_vq, identity(2), {0.1, 0, true, 1e-5});
  q.ema_vq_step(rows({{1, 1}, {-1, 1}}));
  const auto s = q.smoothed_counts();
  EXPECT_EQ(q.ema().counts[1], 0.0);
  EXPECT_NEAR(s[1], 1e-5, 1e-9);
  EXPECT_TRUE(std::isfinite(q.codebook().weights()(1, 0)));
  EXPECT_GT(q.codebook().weights()(1, 0), 1e5);  // 0.9 * 50 / 1e-5
}

TEST(EmaVq, EmptyClusterAtNInitOneStaysNearItsInit) {
  auto q = make(rows({{0, 0}, {50, 50}}), Algorithm::ema_vq, identity(2), {0.1, 1, true, 1e-5});
  q.ema_vq_step(rows({{1, 1}, {-1, 1}}));
  EXPECT_NEAR(q.codebook().weights()(1, 0), 50.0, 50.0 * 1e-4);
}

TEST(EmaVq, ResetCounters) {
  const Matrix w0 = test::random_matrix(4, 2, 3);
  for (int n : {0, 1}) {
    auto q = make(w0, Algorithm::ema_vq, identity(4), {0.1, n, true, 1e-5});
    EXPECT_EQ(q.ema().sums, w0);
    EXPECT_EQ(q.ema().counts, std::vector<double>(4, n));
    q.ema_vq_step(test::random_matrix(8, 2, 4));
    q.reset_counters();
    EXPECT_EQ(q.step_count(), 0u);
    EXPECT_EQ(q.ema().sums, q.codebook().weights());
    EXPECT_EQ(q.ema().counts, std::vector<double>(4, n));
  }
}

TEST(EmaVq, RequiresIdentity) {
  EXPECT_THROW(make(rows({{0}, {1}}), Algorithm::ema_vq,
                    NeighborhoodSchedule(NeighborhoodKind::hard, GridTopology::line(2), 0.1)),
               ConfigError);
}

TEST(EmaVq, ParameterValidation) {
  EXPECT_THROW(make(rows({{0}}), Algorithm::ema_vq, identity(1), {0.0}), ConfigError);
  EXPECT_THROW(make(rows({{0}}), Algorithm::ema_vq, identity(1), {1.5}), ConfigError);
  EXPECT_THROW(make(rows({{0}}), Algorithm::ema_vq, identity(1), {0.1, 2}), ConfigError);
  EXPECT_THROW(make(rows({{0}}), Algorithm::ema_vq, identity(1), {0.1, 1, true, 0.0}), ConfigError);
  EXPECT_THROW(make(rows({{0}}), Algorithm::ema_vq, identity(2)), ConfigError);
  auto q = make(rows({{0}}), Algorithm::ema_vq, identity(1));
  EXPECT_THROW(q.ema_vq_step(Matrix(0, 1)), InputError);
  EXPECT_THROW(q.ema_vq_step(rows({{1, 2}})), ShapeError);
}

TEST(SmoothCounts, PreservesTheTotal) {
  const std::vector<double> n{0.0, 2.0, 5.5, 0.25};
  const auto s = smooth_counts(n, 1e-3);
  double a = 0, b = 0;
  for (std::size_t i = 0; i < n.size(); ++i) a += n[i], b += s[i];
  EXPECT_NEAR(a, b, 1e-12);
  EXPECT_NEAR(s[0], 1e-3 * 7.75 / (7.75 + 4e-3), 1e-15);
  for (double v : s) EXPECT_GT(v, 0.0);
  const auto zero = smooth_counts(std::vector<double>(3, 0.0), 1e-5);
  for (double v : zero) EXPECT_EQ(v, 1e-5);
}

// --- mini-batch KSOM -----------------------------------------------------------------

TEST(MinibatchKsom, IdentityIsEmaVqBitForBit) {
  for (int cell = 0; cell < 4; ++cell) {
    const EmaParams p{0.05, cell & 1, (cell & 2) != 0, 1e-5};
    const Matrix w0 = test::random_matrix(16, 3, 20 + cell);
    auto a = make(w0, Algorithm::ema_vq, identity(16), p);
    auto b = make(w0, Algorithm::ksom_minibatch, identity(16), p);
    for (int step = 0; step < 100; ++step) {
      const Matrix x = test::random_matrix(32, 3, 1000 + step);
      a.ema_vq_step(x);
      b.minibatch_ksom_step(x);
    }
    EXPECT_EQ(a.codebook(), b.codebook());
    EXPECT_EQ(a.ema().sums, b.ema().sums);
    EXPECT_EQ(a.ema().counts, b.ema().counts);
  }
}

TEST(MinibatchKsom, EmptyNeighbourReceivesThePopulatedSum) {
  // Line of 3, t = 0: node 1 is empty but neighbours node 0.
  auto q = make(rows({{0}, {5}, {100}}), Algorithm::ksom_minibatch,
                NeighborhoodSchedule(NeighborhoodKind::hard, GridTopology::line(3), 0.1),
                {0.5, 1, false, 1e-5});
  q.minibatch_ksom_step(rows({{1}, {2}}));
  // node 0: m = .5*0 + .5*3, N = .5 + .5*2; node 1 the same contribution.
  EXPECT_DOUBLE_EQ(q.ema().sums(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(q.ema().counts[0], 1.5);
  EXPECT_DOUBLE_EQ(q.ema().sums(1, 0), 2.5 + 1.5);
  EXPECT_DOUBLE_EQ(q.ema().counts[1], 1.5);
  // node 2 has no weighted members and update-empty is off.
  EXPECT_EQ(q.ema().sums(2, 0), 100.0);
  EXPECT_EQ(q.codebook().weights()(2, 0), 100.0);
}

TEST(MinibatchKsom, LargeTauFallsBackToEmaAfterTheFirstStep) {
  const auto grid = GridTopology::rect(3, 3);
  const EmaParams p{0.1, 1, true, 1e-5};
  auto a = make(test::random_matrix(9, 2, 30), Algorithm::ksom_minibatch,
                NeighborhoodSchedule(NeighborhoodKind::hard, grid, 1e300), p);
  a.step(test::random_matrix(16, 2, 31));
  auto b = make(a.codebook().weights(), Algorithm::ema_vq, NeighborhoodSchedule::identity(grid), p);
  b.restore(a.codebook(), a.ema(), a.step_count());
  for (int s = 0; s < 20; ++s) {
    const Matrix x = test::random_matrix(16, 2, 40 + s);
    EXPECT_EQ(a.step(x).winners, b.step(x).winners);
  }
  EXPECT_LT(test::max_abs_diff(a.codebook().weights(), b.codebook().weights()), 1e-12);
}

TEST(Quantizer, RestoreChecksShapes) {
  auto q = make(rows({{0, 0}, {1, 1}}), Algorithm::ema_vq, identity(2));
  EXPECT_THROW(q.restore(Codebook(rows({{0, 0}})), q.ema(), 0), ShapeError);
  EmaState bad = q.ema();
  bad.counts.pop_back();
  EXPECT_THROW(q.restore(q.codebook(), bad, 0), ShapeError);
}

TEST(Quantizer, CountsStayPositiveOverLongRuns) {
  const auto data = DataSource::uniform_square(2, 3, 64);
  const Matrix init = data.batch(999999);
  auto q = Quantizer(Codebook::sample_from(init, 16, 1),
                     QuantizerConfig{Algorithm::ema_vq, identity(16), {0.01, 1, true, 1e-5}});
  for (std::uint64_t t = 0; t < 100000; ++t) q.step(data.sample(DataSource::kTrainStream, t % 4096, 8));
  for (double n : q.ema().counts) EXPECT_GT(n, 0.0);
  for (double v : q.codebook().weights().values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Quantizer, AlgorithmNames) {
  EXPECT_EQ(parse_algorithm("ksom-batch"), Algorithm::ksom_batch);
  EXPECT_EQ(to_string(Algorithm::ema_vq), "ema-vq");
  EXPECT_THROW(parse_algorithm("som"), ConfigError);
}
