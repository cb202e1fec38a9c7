#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "kvq/codebook.hpp"
#include "kvq/matrix.hpp"
#include "kvq/neighborhood.hpp"

namespace kvq {

enum class Algorithm { ema_vq, ksom_online, ksom_batch, ksom_minibatch };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

/// Knobs of the moving-average learners. beta is also the learning rate of
/// the online rule; the EMA decay is 1 - beta.
struct EmaParams {
  double beta = 0.01;
  /// Initial count N_k(0); 0 or 1.
  int n_init = 1;
  /// Whether clusters without (weighted) members still decay their EMAs.
  bool update_empty = true;
  double epsilon = 1e-5;

  bool operator==(const EmaParams&) const = default;
};

/// Per-cluster running sums m_k and counts N_k.
struct EmaState {
  Matrix sums;
  std::vector<double> counts;
};

struct QuantizerConfig {
  Algorithm algorithm = Algorithm::ksom_minibatch;
  NeighborhoodSchedule schedule;
  EmaParams ema;
};

/// Additive smoothing of EMA counts used in the quotient w = m / N~:
/// N~_k = (N_k + eps) * S / (S + K*eps) with S = sum_k N_k. Falls back to
/// N_k + eps when every count is zero.
std::vector<double> smooth_counts(std::span<const double> counts, double epsilon);

/// Owns a codebook and learns it with one of the Kohonen / EMA rules.
///
/// Every rule assigns the whole input against the pre-update codebook, then
/// applies all updates. Cluster sums accumulate in ascending input order and
/// neighbour contributions in ascending cluster order, so rules that coincide
/// mathematically (identity neighbourhood) also coincide bit for bit. The
/// step counter t advances once per update: per input for the online rules,
/// per batch otherwise; step t uses neighbourhood coefficients A(t).
class Quantizer {
 public:
  Quantizer(Codebook initial, QuantizerConfig config);

  const Codebook& codebook() const noexcept { return codebook_; }
  const QuantizerConfig& config() const noexcept { return config_; }
  const EmaState& ema() const noexcept { return ema_; }
  std::uint64_t step_count() const noexcept { return t_; }
  void set_step_count(std::uint64_t t) noexcept { t_ = t; }

  /// t = 0, m_k = w_k, N_k = n_init.
  void reset_counters();
  /// Replaces codebook, EMA state and step counter (checkpoint restore).
  void restore(Codebook codebook, EmaState ema, std::uint64_t t);

  /// Runs the configured algorithm on one batch and returns the assignment
  /// used for the update (for online rules, each input's winner at the time
  /// it was processed).
  AssignmentBatch step(const Matrix& batch);

  /// w_k += beta * A(t)[k*, k] * (x - w_k).
  void online_ksom_step(std::span<const double> x);

  /// y = hardmax(W x); W += (beta A(t) y) (x - W^T y)^T. Requires the
  /// negative-dot metric.
  void matrix_form_step(std::span<const double> x);

  /// w_k = sum_j A(t)[j,k] S_j / sum_j A(t)[j,k] |C_j|; clusters with zero
  /// weighted count keep their weight. Does not touch the EMA state.
  AssignmentBatch batch_ksom_step(const Matrix& inputs);

  AssignmentBatch ema_vq_step(const Matrix& inputs);
  AssignmentBatch minibatch_ksom_step(const Matrix& inputs);

  std::vector<double> smoothed_counts() const {
    return smooth_counts(ema_.counts, config_.ema.epsilon);
  }

 private:
  /// Shared EMA update: weighted_sums/weighted_counts are the batch
  /// contributions per cluster; zero weighted count marks a cluster empty.
  void apply_ema(const Matrix& weighted_sums, std::span<const double> weighted_counts);

  void check_batch(const Matrix& inputs) const;

  Codebook codebook_;
  QuantizerConfig config_;
  EmaState ema_;
  std::uint64_t t_ = 0;
};

/// Per-cluster input sums in ascending member order.
Matrix cluster_sums(const Matrix& inputs, const AssignmentBatch& assignment);

}  // namespace kvq
