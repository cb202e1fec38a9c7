#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kvq/codebook.hpp"
#include "kvq/data.hpp"
#include "kvq/grid.hpp"
#include "kvq/neighborhood.hpp"
#include "kvq/quantizer.hpp"

namespace kvq {

/// What the quantiser is trained on: encoder outputs of the toy autoencoder,
/// or the data vectors themselves.
enum class ModelKind { autoencoder, none };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// One swept key and the values it takes, kept as text.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
  bool operator==(const SweepAxis&) const = default;
};

/// Everything one experiment needs. The text form is INI-like:
///
///   [quantizer]
///   algorithm = ksom-minibatch
///   # comment
///
/// Key names are unique across sections. Unknown keys, keys in the wrong
/// section and repeated keys are errors.
struct TrainConfig {
  // [run]
  ModelKind model = ModelKind::autoencoder;
  std::uint64_t steps = 1000;
  std::size_t batch_size = 32;
  std::uint64_t eval_interval = 50;
  std::size_t validation_size = 256;
  /// Running-mean window for steps_to_threshold.
  std::size_t threshold_window = 1;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  std::string rng = "mt19937_64";

  // [quantizer]
  Algorithm algorithm = Algorithm::ksom_minibatch;
  NeighborhoodKind neighborhood = NeighborhoodKind::hard;
  std::size_t grid_dims = 2;
  std::size_t grid_width = 8;
  std::size_t grid_height = 8;
  /// Unset means the grid's default neighbour distance.
  std::optional<double> grid_threshold;
  double tau = 0.1;
  EmaParams ema;
  Metric metric = Metric::euclidean;
  InitScheme codebook_init = InitScheme::gaussian;
  double init_scale = 1.0;
  double init_offset = 0.0;

  // [model]
  std::size_t latents = 4;
  std::size_t embedding_dim = 4;
  std::size_t hidden = 32;
  double alpha = 0.25;
  double learning_rate = 0.005;

  // [data]
  DataKind data = DataKind::gaussian_mixture;
  std::size_t data_dim = 16;
  std::size_t components = 16;
  double separation = 4.0;
  std::string data_path;
  std::string split = "train";
  std::size_t patch_size = 4;
  std::size_t stride = 4;
  Normalization normalize = Normalization::affine;
  /// Pool rows reserved for validation (CIFAR and raw vectors).
  std::size_t holdout = 1024;

  // [sweep]
  std::vector<SweepAxis> sweep;

  bool operator==(const TrainConfig&) const = default;

  std::size_t codebook_size() const { return grid_width * grid_height; }
  GridTopology grid() const;
  NeighborhoodSchedule schedule() const;
  QuantizerConfig quantizer_config() const;
};

/// Throws ConfigError with the line number on any malformed line.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::string& path);
/// Canonical text: every key, fixed order, shortest round-trip numbers.
std::string serialize_config(const TrainConfig& config);

/// Sets one key from its text value, wherever it lives.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
/// Applies "key=value".
void apply_override(TrainConfig& config, std::string_view assignment);
std::string get_config_value(const TrainConfig& config, std::string_view key);
/// Every key name in canonical order.
std::vector<std::string> config_keys();

/// Cross-key checks (grid size, EMA-VQ needs the identity neighbourhood,
/// data path for file sources, ...). Throws ConfigError.
void validate(const TrainConfig& config);

/// Cartesian product of the sweep axes, first axis slowest. Each cell is
/// named "key=value,key=value" and has an empty sweep. No axes gives a
/// single unnamed cell.
std::vector<std::pair<std::string, TrainConfig>> expand_sweep(const TrainConfig& config);

}  // namespace kvq
