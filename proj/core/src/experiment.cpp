#include "kvq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "kvq/codebook_file.hpp"
#include "kvq/error.hpp"
#include "kvq/metrics.hpp"
#include "kvq/rng.hpp"

namespace kvq {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::uint64_t kInitSampleStream = 3;
constexpr std::uint8_t kModelMagic[4] = {'K', 'V', 'Q', 'M'};
constexpr std::uint32_t kModelFormatVersion = 1;

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::uint8_t> to_bytes(const std::string& s) {
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t& at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  at += 4;
  return v;
}

double get_f64(std::span<const std::uint8_t> b, std::size_t& at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  at += 8;
  return std::bit_cast<double>(v);
}

Json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

Json optional_number(const std::optional<std::uint64_t>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json stats_json(const std::vector<double>& values) {
  Json j;
  j["n"] = values.size();
  if (values.empty()) {
    j["mean"] = nullptr;
    j["std"] = nullptr;
    return j;
  }
  const SummaryStats s = summarize(values);
  j["mean"] = s.mean;
  j["std"] = s.stddev;
  return j;
}

Codebook initial_codebook(const TrainConfig& config, std::uint64_t seed, const DataSource& data,
                          const ToyAutoencoder* model) {
  const std::size_t k = config.codebook_size();
  if (config.codebook_init == InitScheme::gaussian) {
    const std::size_t d = model ? model->shape().embedding_dim : data.dim();
    return Codebook::gaussian(k, d, seed, config.init_scale, config.init_offset, config.metric);
  }
  // data-sample: K distinct rows of a dedicated sample (encoded when there
  // is a model).
  const std::size_t rows = std::max(k, config.batch_size);
  Matrix sample = data.sample(kInitSampleStream, 0, rows);
  if (model) sample = model->encode_all(sample);
  return Codebook::sample_from(sample, k, seed, config.metric);
}

}  // namespace

// --- Quantiser-only training -----------------------------------------------------

namespace {

void train_codebook_into(Quantizer& quantizer, const DataSource& data,
                         const TrainOptions& options, TrainingTrace& trace) {
  if (data.dim() != quantizer.codebook().dim()) {
    throw ConfigError("data dimension " + std::to_string(data.dim()) +
                      " does not match codebook dimension " +
                      std::to_string(quantizer.codebook().dim()));
  }
  const Matrix validation = data.validation(options.validation_size);
  const std::uint64_t interval = std::max<std::uint64_t>(options.eval_interval, 1);
  const auto eval = [&](std::uint64_t step) {
    const AssignmentBatch a = quantizer.codebook().assign(validation);
    EvalRow row;
    row.step = step;
    row.val_quantization_error = quantization_error(validation, quantizer.codebook());
    row.val_recon_loss = row.val_quantization_error;
    row.val_perplexity = perplexity(UsageHistogram::from_counts(a.counts));
    if (!std::isfinite(row.val_recon_loss)) {
      throw TrainingError("non-finite validation error at step " + std::to_string(step),
                          static_cast<long>(step));
    }
    trace.evals.push_back(row);
  };
  eval(0);
  for (std::uint64_t step = 0; step < options.steps; ++step) {
    const Matrix batch = data.batch(step);
    const double before = quantization_error(batch, quantizer.codebook());
    const AssignmentBatch a = quantizer.step(batch);
    const UsageHistogram usage = UsageHistogram::from_counts(a.counts);
    trace.rows.push_back({step, before, 0.0, perplexity(usage), utilization(usage)});
    if ((step + 1) % interval == 0 || step + 1 == options.steps) eval(step + 1);
  }
}

}  // namespace

TrainingTrace train_codebook(Quantizer& quantizer, const DataSource& data,
                             const TrainOptions& options) {
  TrainingTrace trace;
  train_codebook_into(quantizer, data, options, trace);
  return trace;
}

// --- Data ------------------------------------------------------------------------

Matrix read_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vectors file '" + path.string() + "'");
  Matrix out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + tok +
                          "'");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!out.empty() && row.size() != out.cols()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(out.cols()) + " values, found " +
                        std::to_string(row.size()));
    }
    out.push_row(row);
  }
  if (out.empty()) throw FormatError(path.string() + ": no vectors");
  return out;
}

Matrix load_pool(const TrainConfig& config) {
  switch (config.data) {
    case DataKind::cifar10_binary:
      return load_cifar10(config.data_path, config.split,
                          PatchOptions{config.patch_size, config.stride, config.normalize});
    case DataKind::raw_vectors:
      return read_vectors(config.data_path);
    default:
      throw ConfigError("data = " + std::string(to_string(config.data)) + " has no file pool");
  }
}

DataSource make_data_source(const TrainConfig& config, std::uint64_t seed, const Matrix* pool) {
  switch (config.data) {
    case DataKind::gaussian_mixture:
      return DataSource::gaussian_mixture(config.components, config.data_dim, config.separation,
                                          seed, config.batch_size);
    case DataKind::uniform_square:
      return DataSource::uniform_square(config.data_dim, seed, config.batch_size);
    case DataKind::cifar10_binary:
    case DataKind::raw_vectors: {
      DataSource src = DataSource::raw_vectors(pool ? *pool : load_pool(config), seed,
                                               config.batch_size, config.holdout);
      src.set_kind(config.data);
      return src;
    }
  }
  throw ConfigError("unhandled data kind");
}

std::size_t input_dim(const TrainConfig& config) {
  switch (config.data) {
    case DataKind::gaussian_mixture:
    case DataKind::uniform_square:
      return config.data_dim;
    case DataKind::cifar10_binary:
      return patch_dim(config.patch_size);
    case DataKind::raw_vectors:
      return read_vectors(config.data_path).cols();
  }
  throw ConfigError("unhandled data kind");
}

// --- Runs --------------------------------------------------------------------------

SeedOutcome summarize_seed(const TrainConfig& config, std::uint64_t seed,
                           const TrainingTrace& trace, const Codebook& codebook,
                           const ToyAutoencoder* model, const DataSource& data) {
  SeedOutcome out;
  out.seed = seed;
  if (trace.evals.empty()) return out;
  const EvalRow& last = trace.evals.back();
  out.final_loss = last.val_recon_loss;
  out.final_quantization_error = last.val_quantization_error;

  Matrix points = data.validation(config.validation_size);
  if (model) points = model->encode_all(points);
  const UsageHistogram usage = UsageHistogram::from_counts(codebook.assign(points).counts);
  out.final_perplexity = perplexity(usage);
  out.final_utilization = utilization(usage);

  const GridTopology grid = config.grid();
  if (grid.size() >= 2) {
    out.topographic_error = topographic_error(points, codebook, grid);
    out.permuted_topographic_error = permuted_topographic_error(points, codebook, grid, seed);
  }

  std::vector<double> losses;
  for (const auto& e : trace.evals) losses.push_back(e.val_recon_loss);
  if (const auto i = steps_to_threshold(losses, 0.10, config.threshold_window))
    out.steps_10 = trace.evals[*i].step;
  if (const auto i = steps_to_threshold(losses, 0.20, config.threshold_window))
    out.steps_20 = trace.evals[*i].step;
  return out;
}

SeedRun run_seed(const TrainConfig& config, std::uint64_t seed, const Matrix* pool) {
  validate(config);
  const DataSource data = make_data_source(config, seed, pool);
  const TrainOptions options{config.steps, config.eval_interval, config.validation_size};

  std::optional<ToyAutoencoder> model;
  if (config.model == ModelKind::autoencoder) {
    model.emplace(AutoencoderShape{data.dim(), config.latents, config.embedding_dim, config.hidden},
                  config.alpha, config.learning_rate, seed);
  }
  Quantizer quantizer(initial_codebook(config, seed, data, model ? &*model : nullptr),
                      config.quantizer_config());

  TrainingTrace trace;
  try {
    if (model)
      train_into(*model, quantizer, data, options, trace);
    else
      train_codebook_into(quantizer, data, options, trace);
  } catch (const TrainingError& e) {
    SeedOutcome out;
    out.seed = seed;
    out.diverged = true;
    out.diverged_step = static_cast<std::uint64_t>(e.step());
    return SeedRun{out, std::move(trace), quantizer.codebook(), std::move(model)};
  }
  SeedOutcome out =
      summarize_seed(config, seed, trace, quantizer.codebook(), model ? &*model : nullptr, data);
  return SeedRun{out, std::move(trace), quantizer.codebook(), std::move(model)};
}

std::string trace_csv(const TrainingTrace& trace) {
  std::string out = "step,recon_loss,commitment_loss,perplexity,utilization\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.step) + "," + fmt(r.recon_loss) + "," + fmt(r.commitment_loss) + "," +
           fmt(r.perplexity) + "," + fmt(r.utilization) + "\n";
  }
  return out;
}

std::string eval_csv(const TrainingTrace& trace) {
  std::string out = "step,val_recon_loss,val_quantization_error,val_perplexity\n";
  for (const auto& e : trace.evals) {
    out += std::to_string(e.step) + "," + fmt(e.val_recon_loss) + "," +
           fmt(e.val_quantization_error) + "," + fmt(e.val_perplexity) + "\n";
  }
  return out;
}

std::string summary_json(const TrainConfig& config, const std::vector<SeedOutcome>& outcomes) {
  Json root;
  Json cfg;
  for (const auto& key : config_keys()) cfg[key] = get_config_value(config, key);
  root["config"] = cfg;

  Json seeds = Json::array();
  Json diverged = Json::array();
  std::vector<double> loss, qe, s10, s20, ppl, util, te, pte;
  for (const auto& o : outcomes) {
    Json s;
    s["seed"] = o.seed;
    s["diverged"] = o.diverged;
    if (o.diverged) {
      s["diverged_step"] = optional_number(o.diverged_step);
      diverged.push_back(o.seed);
      seeds.push_back(s);
      continue;
    }
    s["final_loss"] = o.final_loss;
    s["final_quantization_error"] = o.final_quantization_error;
    s["steps_10"] = optional_number(o.steps_10);
    s["steps_20"] = optional_number(o.steps_20);
    s["perplexity"] = o.final_perplexity;
    s["utilization"] = o.final_utilization;
    s["topographic_error"] = optional_number(o.topographic_error);
    s["permuted_topographic_error"] = optional_number(o.permuted_topographic_error);
    seeds.push_back(s);

    loss.push_back(o.final_loss);
    qe.push_back(o.final_quantization_error);
    if (o.steps_10) s10.push_back(static_cast<double>(*o.steps_10));
    if (o.steps_20) s20.push_back(static_cast<double>(*o.steps_20));
    ppl.push_back(o.final_perplexity);
    util.push_back(o.final_utilization);
    if (o.topographic_error) te.push_back(*o.topographic_error);
    if (o.permuted_topographic_error) pte.push_back(*o.permuted_topographic_error);
  }
  root["seeds"] = seeds;
  root["diverged_seeds"] = diverged;

  Json stats;
  stats["final_loss"] = stats_json(loss);
  stats["final_quantization_error"] = stats_json(qe);
  stats["steps_10"] = stats_json(s10);
  stats["steps_20"] = stats_json(s20);
  stats["perplexity"] = stats_json(ppl);
  stats["utilization"] = stats_json(util);
  stats["topographic_error"] = stats_json(te);
  stats["permuted_topographic_error"] = stats_json(pte);
  root["summary"] = stats;
  return root.dump(2) + "\n";
}

RunReport run_experiment(const TrainConfig& config, const std::filesystem::path& directory,
                         unsigned jobs) {
  validate(config);
  if (!config.sweep.empty()) throw ConfigError("config has a [sweep] section; use run_sweep");
  std::optional<Matrix> pool;
  if (config.data == DataKind::cifar10_binary || config.data == DataKind::raw_vectors)
    pool = load_pool(config);

  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw InputError("cannot create '" + directory.string() + "': " + ec.message());

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::vector<std::string> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        const std::uint64_t seed = config.seeds[i];
        SeedRun run = run_seed(config, seed, pool ? &*pool : nullptr);
        const auto dir = directory / ("seed-" + std::to_string(seed));
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "trace.csv", to_bytes(trace_csv(run.trace)));
        write_file_atomic(dir / "eval.csv", to_bytes(eval_csv(run.trace)));
        save_codebook(run.codebook, config.grid(), dir / "codebook.kvq");
        if (run.model) save_model(*run.model, dir / "model.kvqm");
        outcomes[i] = run.outcome;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(config.seeds.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned t = 0; t < threads; ++t) pool_threads.emplace_back(worker);
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty())
      throw Error("seed " + std::to_string(config.seeds[i]) + ": " + errors[i]);
  }

  write_file_atomic(directory / "config.txt", to_bytes(serialize_config(config)));
  write_file_atomic(directory / "summary.json", to_bytes(summary_json(config, outcomes)));
  return RunReport{directory, std::move(outcomes)};
}

std::vector<RunReport> run_sweep(const TrainConfig& config, const std::filesystem::path& directory,
                                 unsigned jobs) {
  validate(config);
  std::vector<RunReport> reports;
  for (const auto& [name, cell] : expand_sweep(config)) {
    validate(cell);
    reports.push_back(run_experiment(cell, name.empty() ? directory : directory / name, jobs));
  }
  return reports;
}

// --- Model files ---------------------------------------------------------------------

std::vector<std::uint8_t> encode_model(const ToyAutoencoder& model) {
  std::vector<std::uint8_t> out(std::begin(kModelMagic), std::end(kModelMagic));
  const AutoencoderShape& s = model.shape();
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(s.input_dim));
  put_u32(out, static_cast<std::uint32_t>(s.latents));
  put_u32(out, static_cast<std::uint32_t>(s.embedding_dim));
  put_u32(out, static_cast<std::uint32_t>(s.hidden));
  put_f64(out, model.alpha());
  put_f64(out, model.learning_rate());
  AutoencoderParams params = model.params();
  params.for_each_tensor([&](std::string_view, std::span<double> values) {
    for (double v : values) put_f64(out, v);
  });
  return out;
}

ToyAutoencoder decode_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 4 + 5 * 4 + 2 * 8;
  if (bytes.size() < kHeader) {
    throw FormatError("model file too short: expected at least " + std::to_string(kHeader) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  if (!std::equal(std::begin(kModelMagic), std::end(kModelMagic), bytes.begin()))
    throw FormatError("bad magic: not a model file");
  std::size_t at = 4;
  const std::uint32_t version = get_u32(bytes, at);
  if (version != kModelFormatVersion)
    throw FormatError("unsupported model format version " + std::to_string(version));
  AutoencoderShape shape;
  shape.input_dim = get_u32(bytes, at);
  shape.latents = get_u32(bytes, at);
  shape.embedding_dim = get_u32(bytes, at);
  shape.hidden = get_u32(bytes, at);
  const double alpha = get_f64(bytes, at);
  const double lr = get_f64(bytes, at);
  ToyAutoencoder model(shape, alpha, lr, 0);
  std::size_t count = 0;
  model.params().for_each_tensor(
      [&](std::string_view, std::span<double> values) { count += values.size(); });
  if (bytes.size() != kHeader + 8 * count) {
    throw FormatError("model size mismatch: expected " + std::to_string(kHeader + 8 * count) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  model.params().for_each_tensor([&](std::string_view, std::span<double> values) {
    for (double& v : values) v = get_f64(bytes, at);
  });
  return model;
}

void save_model(const ToyAutoencoder& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

ToyAutoencoder load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path));
}

}  // namespace kvq
