#include "kvq/quantizer.hpp"

#include <cmath>
#include <string>

#include "kvq/error.hpp"

namespace kvq {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::ema_vq:
      return "ema-vq";
    case Algorithm::ksom_online:
      return "ksom-online";
    case Algorithm::ksom_batch:
      return "ksom-batch";
    case Algorithm::ksom_minibatch:
      return "ksom-minibatch";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "ema-vq") return Algorithm::ema_vq;
  if (text == "ksom-online") return Algorithm::ksom_online;
  if (text == "ksom-batch") return Algorithm::ksom_batch;
  if (text == "ksom-minibatch") return Algorithm::ksom_minibatch;
  throw ConfigError("unknown algorithm '" + std::string(text) +
                    "' (expected ema-vq|ksom-online|ksom-batch|ksom-minibatch)");
}

std::vector<double> smooth_counts(std::span<const double> counts, double epsilon) {
  double total = 0.0;
  for (double n : counts) total += n;
  std::vector<double> out(counts.size());
  if (total <= 0.0) {
    for (std::size_t k = 0; k < counts.size(); ++k) out[k] = counts[k] + epsilon;
    return out;
  }
  const double k_eps = static_cast<double>(counts.size()) * epsilon;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[k] = (counts[k] + epsilon) / (total + k_eps) * total;
  }
  return out;
}

Matrix cluster_sums(const Matrix& inputs, const AssignmentBatch& assignment) {
  Matrix sums(assignment.members.size(), inputs.cols());
  for (std::size_t k = 0; k < assignment.members.size(); ++k) {
    auto dst = sums.row(k);
    for (std::size_t i : assignment.members[k]) {
      const auto src = inputs.row(i);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  return sums;
}

Quantizer::Quantizer(Codebook initial, QuantizerConfig config)
    : codebook_(std::move(initial)), config_(std::move(config)) {
  const EmaParams& p = config_.ema;
  if (!(p.beta > 0.0 && p.beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (!(p.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (p.n_init != 0 && p.n_init != 1) throw ConfigError("n-init must be 0 or 1");
  if (config_.schedule.size() != codebook_.size()) {
    throw ConfigError("grid has " + std::to_string(config_.schedule.size()) +
                      " nodes but codebook has " + std::to_string(codebook_.size()));
  }
  if (config_.algorithm == Algorithm::ema_vq &&
      config_.schedule.kind() != NeighborhoodKind::identity) {
    throw ConfigError("ema-vq requires the identity neighborhood");
  }
  reset_counters();
}

void Quantizer::reset_counters() {
  t_ = 0;
  ema_.sums = codebook_.weights();
  ema_.counts.assign(codebook_.size(), static_cast<double>(config_.ema.n_init));
}

void Quantizer::restore(Codebook codebook, EmaState ema, std::uint64_t t) {
  if (codebook.size() != codebook_.size() || codebook.dim() != codebook_.dim())
    throw ShapeError("restored codebook has a different shape");
  if (ema.sums.rows() != codebook.size() || ema.sums.cols() != codebook.dim() ||
      ema.counts.size() != codebook.size())
    throw ShapeError("restored EMA state does not match the codebook");
  codebook_ = std::move(codebook);
  ema_ = std::move(ema);
  t_ = t;
}

void Quantizer::check_batch(const Matrix& inputs) const {
  if (inputs.rows() > 0 && inputs.cols() != codebook_.dim()) {
    throw ShapeError("batch dimension " + std::to_string(inputs.cols()) +
                     " does not match codebook dimension " + std::to_string(codebook_.dim()));
  }
  for (double v : inputs.values()) {
    if (!std::isfinite(v)) throw InputError("non-finite value in quantizer input");
  }
}

AssignmentBatch Quantizer::step(const Matrix& batch) {
  switch (config_.algorithm) {
    case Algorithm::ema_vq:
      return ema_vq_step(batch);
    case Algorithm::ksom_minibatch:
      return minibatch_ksom_step(batch);
    case Algorithm::ksom_batch:
      return batch_ksom_step(batch);
    case Algorithm::ksom_online: {
      check_batch(batch);
      AssignmentBatch out;
      out.members.resize(codebook_.size());
      out.counts.assign(codebook_.size(), 0);
      out.winners.resize(batch.rows());
      for (std::size_t i = 0; i < batch.rows(); ++i) {
        const std::size_t k = codebook_.best_matching_unit(batch.row(i));
        out.winners[i] = k;
        out.members[k].push_back(i);
        ++out.counts[k];
        online_ksom_step(batch.row(i));
      }
      return out;
    }
  }
  throw ConfigError("unhandled algorithm");
}

void Quantizer::online_ksom_step(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite value in quantizer input");
  }
  const std::size_t winner = codebook_.best_matching_unit(x);
  Matrix& w = codebook_.weights();
  const double beta = config_.ema.beta;
  config_.schedule.for_each_support(winner, t_, [&](std::size_t k, double a) {
    if (a == 0.0) return;
    const double rate = beta * a;
    auto row = w.row(k);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] + rate * (x[c] - row[c]);
  });
  ++t_;
}

void Quantizer::matrix_form_step(std::span<const double> x) {
  if (codebook_.metric() != Metric::negative_dot) {
    throw ConfigError("matrix-form update needs the negative-dot metric");
  }
  if (x.size() != codebook_.dim()) throw ShapeError("input dimension mismatch");
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite value in quantizer input");
  }
  Matrix& w = codebook_.weights();
  const std::size_t k_size = codebook_.size();
  const std::size_t d = codebook_.dim();

  // y = hardmax(W x), first maximum wins.
  std::vector<double> y(k_size, 0.0);
  std::size_t arg = 0;
  double best = dot(w.row(0), x);
  for (std::size_t k = 1; k < k_size; ++k) {
    const double s = dot(w.row(k), x);
    if (s > best) {
      best = s;
      arg = k;
    }
  }
  y[arg] = 1.0;

  // W^T y and A y.
  std::vector<double> wty(d, 0.0);
  for (std::size_t k = 0; k < k_size; ++k) {
    const auto row = w.row(k);
    for (std::size_t c = 0; c < d; ++c) wty[c] += y[k] * row[c];
  }
  std::vector<double> ay(k_size, 0.0);
  for (std::size_t k = 0; k < k_size; ++k) {
    for (std::size_t j = 0; j < k_size; ++j) {
      ay[k] += config_.schedule.coefficient(k, j, t_) * y[j];
    }
  }

  const double beta = config_.ema.beta;
  for (std::size_t k = 0; k < k_size; ++k) {
    const double rate = beta * ay[k];
    auto row = w.row(k);
    for (std::size_t c = 0; c < d; ++c) row[c] = row[c] + rate * (x[c] - wty[c]);
  }
  ++t_;
}

AssignmentBatch Quantizer::batch_ksom_step(const Matrix& inputs) {
  if (inputs.rows() == 0) throw InputError("batch KSOM needs a nonempty dataset");
  check_batch(inputs);
  AssignmentBatch assignment = codebook_.assign(inputs);
  const Matrix sums = cluster_sums(inputs, assignment);
  const std::size_t k_size = codebook_.size();
  const std::size_t d = codebook_.dim();
  Matrix& w = codebook_.weights();

  std::vector<double> numer(d);
  for (std::size_t k = 0; k < k_size; ++k) {
    std::fill(numer.begin(), numer.end(), 0.0);
    double count = 0.0;
    config_.schedule.for_each_support(k, t_, [&](std::size_t j, double a) {
      const auto s = sums.row(j);
      for (std::size_t c = 0; c < d; ++c) numer[c] += a * s[c];
      count += a * static_cast<double>(assignment.counts[j]);
    });
    if (count > 0.0) {
      auto row = w.row(k);
      for (std::size_t c = 0; c < d; ++c) row[c] = numer[c] / count;
    }
  }
  ++t_;
  return assignment;
}

void Quantizer::apply_ema(const Matrix& weighted_sums, std::span<const double> weighted_counts) {
  const EmaParams& p = config_.ema;
  const double decay = 1.0 - p.beta;
  const std::size_t k_size = codebook_.size();
  const std::size_t d = codebook_.dim();

  std::vector<bool> touched(k_size, false);
  for (std::size_t k = 0; k < k_size; ++k) {
    if (!p.update_empty && weighted_counts[k] == 0.0) continue;
    touched[k] = true;
    auto m = ema_.sums.row(k);
    const auto s = weighted_sums.row(k);
    for (std::size_t c = 0; c < d; ++c) m[c] = decay * m[c] + p.beta * s[c];
    ema_.counts[k] = decay * ema_.counts[k] + p.beta * weighted_counts[k];
  }

  const std::vector<double> smoothed = smooth_counts(ema_.counts, p.epsilon);
  Matrix& w = codebook_.weights();
  for (std::size_t k = 0; k < k_size; ++k) {
    if (!touched[k]) continue;
    const auto m = ema_.sums.row(k);
    auto row = w.row(k);
    for (std::size_t c = 0; c < d; ++c) row[c] = m[c] / smoothed[k];
  }
}

AssignmentBatch Quantizer::ema_vq_step(const Matrix& inputs) {
  if (inputs.rows() == 0) throw InputError("EMA-VQ step needs a nonempty batch");
  check_batch(inputs);
  AssignmentBatch assignment = codebook_.assign(inputs);
  const Matrix sums = cluster_sums(inputs, assignment);
  std::vector<double> counts(assignment.counts.begin(), assignment.counts.end());
  apply_ema(sums, counts);
  ++t_;
  return assignment;
}

AssignmentBatch Quantizer::minibatch_ksom_step(const Matrix& inputs) {
  if (inputs.rows() == 0) throw InputError("mini-batch KSOM step needs a nonempty batch");
  check_batch(inputs);
  AssignmentBatch assignment = codebook_.assign(inputs);
  const Matrix sums = cluster_sums(inputs, assignment);
  const std::size_t k_size = codebook_.size();
  const std::size_t d = codebook_.dim();

  Matrix weighted_sums(k_size, d);
  std::vector<double> weighted_counts(k_size, 0.0);
  for (std::size_t k = 0; k < k_size; ++k) {
    auto dst = weighted_sums.row(k);
    config_.schedule.for_each_support(k, t_, [&](std::size_t j, double a) {
      const auto s = sums.row(j);
      for (std::size_t c = 0; c < d; ++c) dst[c] += a * s[c];
      weighted_counts[k] += a * static_cast<double>(assignment.counts[j]);
    });
  }
  apply_ema(weighted_sums, weighted_counts);
  ++t_;
  return assignment;
}

}  // namespace kvq
