#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kvq/autoencoder.hpp"
#include "kvq/config.hpp"
#include "kvq/data.hpp"
#include "kvq/quantizer.hpp"

namespace kvq {

/// Trains the quantiser directly on data batches (no autoencoder). Trace
/// rows report the batch quantisation error against the pre-update codebook
/// as recon_loss; evaluations use the held-out quantisation error.
TrainingTrace train_codebook(Quantizer& quantizer, const DataSource& data,
                             const TrainOptions& options);

/// The data source a config describes, for one seed. CIFAR and raw-vector
/// pools are read from disk on every call; pass a preloaded pool to share it.
DataSource make_data_source(const TrainConfig& config, std::uint64_t seed,
                            const Matrix* pool = nullptr);
/// Reads the CIFAR patches or raw vectors behind a file-backed config.
Matrix load_pool(const TrainConfig& config);
/// Whitespace- or comma-separated numbers, one vector per line.
Matrix read_vectors(const std::filesystem::path& path);

/// Vector length the config's data source emits.
std::size_t input_dim(const TrainConfig& config);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::optional<std::uint64_t> diverged_step;
  /// Held-out reconstruction loss (or quantisation error without a model).
  double final_loss = 0.0;
  double final_quantization_error = 0.0;
  double final_perplexity = 0.0;
  double final_utilization = 0.0;
  /// Absent for single-node grids.
  std::optional<double> topographic_error;
  std::optional<double> permuted_topographic_error;
  /// Steps until the held-out loss is within +10% / +20% of its final value.
  std::optional<std::uint64_t> steps_10;
  std::optional<std::uint64_t> steps_20;
};

/// Everything one seed produced.
struct SeedRun {
  SeedOutcome outcome;
  TrainingTrace trace;
  Codebook codebook;
  std::optional<ToyAutoencoder> model;
};

/// Trains one seed in memory.
SeedRun run_seed(const TrainConfig& config, std::uint64_t seed, const Matrix* pool = nullptr);

/// Fills the final-value fields of an outcome from a finished run.
SeedOutcome summarize_seed(const TrainConfig& config, std::uint64_t seed,
                           const TrainingTrace& trace, const Codebook& codebook,
                           const ToyAutoencoder* model, const DataSource& data);

/// Deterministic JSON report: the resolved config, per-seed outcomes and
/// mean/std over non-diverged seeds.
std::string summary_json(const TrainConfig& config, const std::vector<SeedOutcome>& outcomes);

struct RunReport {
  std::filesystem::path directory;
  std::vector<SeedOutcome> outcomes;
};

/// Runs every seed and writes, under `directory`:
///   config.txt, summary.json,
///   seed-<n>/trace.csv, seed-<n>/eval.csv, seed-<n>/codebook.kvq,
///   seed-<n>/model.kvqm (autoencoder runs).
/// Seeds run on up to `jobs` threads; results do not depend on it.
RunReport run_experiment(const TrainConfig& config, const std::filesystem::path& directory,
                         unsigned jobs = 1);

/// One run_experiment per sweep cell, each in directory/<cell name>.
std::vector<RunReport> run_sweep(const TrainConfig& config, const std::filesystem::path& directory,
                                 unsigned jobs = 1);

std::string trace_csv(const TrainingTrace& trace);
std::string eval_csv(const TrainingTrace& trace);

/// Autoencoder weights ("KVQM"): magic, version u32, input_dim, latents,
/// embedding_dim, hidden (u32 each), alpha and learning rate (f64), then every
/// tensor as little-endian f64 in for_each_tensor order.
std::vector<std::uint8_t> encode_model(const ToyAutoencoder& model);
ToyAutoencoder decode_model(std::span<const std::uint8_t> bytes);
void save_model(const ToyAutoencoder& model, const std::filesystem::path& path);
ToyAutoencoder load_model(const std::filesystem::path& path);

}  // namespace kvq
