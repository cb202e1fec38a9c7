// kvq: train, sweep and inspect Kohonen / EMA vector quantisers.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kvq/autoencoder.hpp"
#include "kvq/codebook_file.hpp"
#include "kvq/config.hpp"
#include "kvq/error.hpp"
#include "kvq/experiment.hpp"
#include "kvq/ppm.hpp"

namespace fs = std::filesystem;
using namespace kvq;

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> output_dir;
  std::optional<std::string> seeds;
  std::optional<std::uint64_t> steps;
  std::optional<std::string> data_path;
  unsigned jobs = 1;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.config_path, "Config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", a.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("-o,--output-dir", a.output_dir, "Output directory");
  cmd->add_option("--seeds", a.seeds, "Seeds, e.g. 1..10 or 1,4,7");
  cmd->add_option("--steps", a.steps, "Training steps per seed");
  cmd->add_option("--data-path", a.data_path, "Dataset file or directory");
  cmd->add_option("-j,--jobs", a.jobs, "Seeds trained in parallel")->check(CLI::PositiveNumber);
}

TrainConfig resolve_config(const ConfigArgs& a) {
  TrainConfig c = a.config_path.empty() ? TrainConfig{} : load_config(a.config_path);
  for (const auto& o : a.overrides) apply_override(c, o);
  if (a.output_dir) c.output_dir = *a.output_dir;
  if (a.seeds) set_config_value(c, "seeds", *a.seeds);
  if (a.steps) c.steps = *a.steps;
  if (a.data_path) c.data_path = *a.data_path;
  validate(c);
  return c;
}

void print_report(const RunReport& r) {
  std::printf("%s\n", r.directory.string().c_str());
  std::printf("  %6s %14s %14s %10s %10s %8s\n", "seed", "final_loss", "quant_error", "steps+10%",
              "perplexity", "util");
  for (const auto& o : r.outcomes) {
    if (o.diverged) {
      std::printf("  %6llu  diverged at step %llu\n", static_cast<unsigned long long>(o.seed),
                  static_cast<unsigned long long>(o.diverged_step.value_or(0)));
      continue;
    }
    const std::string s10 = o.steps_10 ? std::to_string(*o.steps_10) : "-";
    std::printf("  %6llu %14.6g %14.6g %10s %10.4g %8.4g\n",
                static_cast<unsigned long long>(o.seed), o.final_loss,
                o.final_quantization_error, s10.c_str(), o.final_perplexity,
                o.final_utilization);
  }
}

// A trained seed: the run's config plus its codebook and (optional) model.
struct LoadedRun {
  TrainConfig config;
  CodebookFile codebook;
  std::optional<ToyAutoencoder> model;
};

LoadedRun load_run(const fs::path& run_dir, std::uint64_t seed) {
  const fs::path seed_dir = run_dir / ("seed-" + std::to_string(seed));
  LoadedRun out{load_config((run_dir / "config.txt").string()),
                load_codebook(seed_dir / "codebook.kvq"), std::nullopt};
  if (fs::exists(seed_dir / "model.kvqm")) out.model = load_model(seed_dir / "model.kvqm");
  return out;
}

int cmd_render(const fs::path& run_dir, std::uint64_t seed, const fs::path& output) {
  LoadedRun run = load_run(run_dir, seed);
  if (run.config.data != DataKind::cifar10_binary)
    throw ConfigError("render-grid needs a run trained on image patches (data = cifar10-binary)");
  const Codebook& cb = run.codebook.codebook;
  const Matrix decoded = run.model ? run.model->decode_grid(cb) : cb.weights();
  write_codebook_grid(decoded, run.codebook.grid, run.config.patch_size, run.config.normalize,
                      output);
  std::printf("%s\n", output.string().c_str());
  return 0;
}

int cmd_perturb(const fs::path& run_dir, std::uint64_t seed, const std::vector<int>& offsets,
                const std::string& mode_text, std::size_t samples) {
  LoadedRun run = load_run(run_dir, seed);
  if (!run.model) throw ConfigError("perturb needs an autoencoder run");
  const ShiftMode mode = mode_text == "grid"    ? ShiftMode::grid
                         : mode_text == "index" ? ShiftMode::index
                                                : throw ConfigError("mode must be grid or index");
  const DataSource data = make_data_source(run.config, seed);
  const Matrix inputs = data.validation(samples);
  std::printf("offset,mode,mse\n");
  for (int offset : offsets) {
    const double mse =
        perturbation_mse(*run.model, run.codebook.codebook, run.codebook.grid, inputs, offset, mode);
    std::printf("%d,%s,%.17g\n", offset, mode_text.c_str(), mse);
  }
  return 0;
}

int cmd_inspect(const fs::path& path, bool values) {
  const auto bytes = read_file(path);
  const CodebookFile f = decode_codebook(bytes);
  const Codebook& cb = f.codebook;
  std::printf("file        %s (%zu bytes)\n", path.string().c_str(), bytes.size());
  std::printf("format      KVQ1 v%u\n", kCodebookFormatVersion);
  std::printf("codebook    K=%zu d=%zu metric=%s\n", cb.size(), cb.dim(),
              std::string(to_string(cb.metric())).c_str());
  std::printf("grid        %dD %zux%zu\n", f.grid.dimensionality(), f.grid.width(),
              f.grid.height());
  double lo = cb.weights().values().front(), hi = lo;
  for (double v : cb.weights().values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::printf("range       [%.9g, %.9g]\n", lo, hi);
  if (values) {
    for (std::size_t k = 0; k < cb.size(); ++k) {
      const LatticePoint p = f.grid.coords(k);
      std::printf("%zu (%d,%d):", k, p.x, p.y);
      for (double v : cb.prototype(k)) std::printf(" %.9g", v);
      std::printf("\n");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kohonen self-organising maps and EMA vector quantisation"};
  app.require_subcommand(1);

  ConfigArgs train_args;
  auto* train = app.add_subcommand("train", "Train every seed of one config");
  add_config_args(train, train_args);

  ConfigArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Train every cell of the config's [sweep] section");
  add_config_args(sweep, sweep_args);

  ConfigArgs show_args;
  auto* show = app.add_subcommand("show-config", "Print the resolved config");
  add_config_args(show, show_args);

  std::string run_dir;
  std::uint64_t seed = 1;
  std::string output = "grid.ppm";
  auto* render = app.add_subcommand("render-grid", "Render a trained codebook grid as PPM");
  render->add_option("run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  render->add_option("--seed", seed, "Seed to render");
  render->add_option("-o,--output", output, "Output PPM path");

  std::vector<int> offsets{-1, 1};
  std::string mode = "grid";
  std::size_t samples = 256;
  auto* perturb = app.add_subcommand("perturb", "Reconstruction error under shifted codes");
  perturb->add_option("run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  perturb->add_option("--seed", seed, "Seed to evaluate");
  perturb->add_option("--offsets", offsets, "Code offsets")->delimiter(',');
  perturb->add_option("--mode", mode, "Shift along the grid or the raw index")
      ->check(CLI::IsMember({"grid", "index"}));
  perturb->add_option("--samples", samples, "Held-out inputs")->check(CLI::PositiveNumber);

  std::string codebook_path;
  bool values = false;
  auto* inspect = app.add_subcommand("inspect-codebook", "Print a codebook file's header");
  inspect->add_option("file", codebook_path, "Codebook file")->required()->check(CLI::ExistingFile);
  inspect->add_flag("--values", values, "Also print every prototype");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const TrainConfig c = resolve_config(train_args);
      print_report(run_experiment(c, c.output_dir, train_args.jobs));
    } else if (*sweep) {
      const TrainConfig c = resolve_config(sweep_args);
      for (const auto& r : run_sweep(c, c.output_dir, sweep_args.jobs)) print_report(r);
    } else if (*show) {
      std::cout << serialize_config(resolve_config(show_args));
    } else if (*render) {
      return cmd_render(run_dir, seed, output);
    } else if (*perturb) {
      return cmd_perturb(run_dir, seed, offsets, mode, samples);
    } else if (*inspect) {
      return cmd_inspect(codebook_path, values);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kvq: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
