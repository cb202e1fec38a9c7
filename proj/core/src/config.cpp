#include "kvq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <system_error>

#include "kvq/error.hpp"
#include "kvq/rng.hpp"

namespace kvq {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::autoencoder ? "autoencoder" : "none";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "autoencoder") return ModelKind::autoencoder;
  if (text == "none") return ModelKind::none;
  throw ConfigError("unknown model '" + std::string(text) + "' (expected autoencoder|none)");
}

GridTopology TrainConfig::grid() const {
  return grid_dims == 1 ? GridTopology::line(grid_width)
                        : GridTopology::rect(grid_width, grid_height);
}

NeighborhoodSchedule TrainConfig::schedule() const {
  return NeighborhoodSchedule(neighborhood, grid(), tau, grid_threshold);
}

QuantizerConfig TrainConfig::quantizer_config() const {
  return QuantizerConfig{algorithm, schedule(), ema};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError(std::string(key) + ": expected a finite number, got '" + std::string(text) +
                      "'");
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" +
                      std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "yes" || text == "true" || text == "1") return true;
  if (text == "no" || text == "false" || text == "0") return false;
  throw ConfigError(std::string(key) + ": expected yes|no, got '" + std::string(text) + "'");
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(trim(text.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// "1, 2, 5" or "1..10" or a mix of both.
std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (auto item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string_view::npos) {
      seeds.push_back(parse_uint("seeds", item));
      continue;
    }
    const auto lo = parse_uint("seeds", trim(item.substr(0, dots)));
    const auto hi = parse_uint("seeds", trim(item.substr(dots + 2)));
    if (hi < lo) throw ConfigError("seeds: empty range '" + std::string(item) + "'");
    if (hi - lo >= 100000) throw ConfigError("seeds: range too long");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("seeds: at least one seed required");
  return seeds;
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(seeds[i]);
  }
  return out;
}

struct Key {
  std::string_view section;
  std::string_view name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

template <typename T>
Key size_key(std::string_view section, std::string_view name, T TrainConfig::*field) {
  return {section, name, [field](const TrainConfig& c) { return std::to_string(c.*field); },
          [field, name](TrainConfig& c, std::string_view v) {
            c.*field = static_cast<T>(parse_uint(name, v));
          }};
}

Key double_key(std::string_view section, std::string_view name, double TrainConfig::*field) {
  return {section, name, [field](const TrainConfig& c) { return format_double(c.*field); },
          [field, name](TrainConfig& c, std::string_view v) { c.*field = parse_double(name, v); }};
}

Key string_key(std::string_view section, std::string_view name,
               std::string TrainConfig::*field) {
  return {section, name, [field](const TrainConfig& c) { return c.*field; },
          [field](TrainConfig& c, std::string_view v) { c.*field = std::string(v); }};
}

template <typename E, typename Parse>
Key enum_key(std::string_view section, std::string_view name, E TrainConfig::*field,
             Parse parse) {
  return {section, name,
          [field](const TrainConfig& c) { return std::string(to_string(c.*field)); },
          [field, parse](TrainConfig& c, std::string_view v) { c.*field = parse(v); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(enum_key("run", "model", &TrainConfig::model, parse_model_kind));
    k.push_back(size_key("run", "steps", &TrainConfig::steps));
    k.push_back(size_key("run", "batch-size", &TrainConfig::batch_size));
    k.push_back(size_key("run", "eval-interval", &TrainConfig::eval_interval));
    k.push_back(size_key("run", "validation-size", &TrainConfig::validation_size));
    k.push_back(size_key("run", "threshold-window", &TrainConfig::threshold_window));
    k.push_back({"run", "seeds", [](const TrainConfig& c) { return join_seeds(c.seeds); },
                 [](TrainConfig& c, std::string_view v) { c.seeds = parse_seeds(v); }});
    k.push_back(string_key("run", "output-dir", &TrainConfig::output_dir));
    k.push_back({"run", "rng", [](const TrainConfig& c) { return c.rng; },
                 [](TrainConfig& c, std::string_view v) {
                   if (v != kRngAlgorithm)
                     throw ConfigError("rng: only '" + std::string(kRngAlgorithm) +
                                       "' is available, got '" + std::string(v) + "'");
                   c.rng = std::string(v);
                 }});

    k.push_back(enum_key("quantizer", "algorithm", &TrainConfig::algorithm, parse_algorithm));
    k.push_back(enum_key("quantizer", "neighborhood", &TrainConfig::neighborhood,
                         parse_neighborhood_kind));
    k.push_back(size_key("quantizer", "grid-dims", &TrainConfig::grid_dims));
    k.push_back(size_key("quantizer", "grid-width", &TrainConfig::grid_width));
    k.push_back(size_key("quantizer", "grid-height", &TrainConfig::grid_height));
    k.push_back({"quantizer", "grid-threshold",
                 [](const TrainConfig& c) {
                   return c.grid_threshold ? format_double(*c.grid_threshold)
                                           : std::string("default");
                 },
                 [](TrainConfig& c, std::string_view v) {
                   if (v == "default")
                     c.grid_threshold.reset();
                   else
                     c.grid_threshold = parse_double("grid-threshold", v);
                 }});
    k.push_back(double_key("quantizer", "tau", &TrainConfig::tau));
    k.push_back({"quantizer", "beta", [](const TrainConfig& c) { return format_double(c.ema.beta); },
                 [](TrainConfig& c, std::string_view v) { c.ema.beta = parse_double("beta", v); }});
    k.push_back({"quantizer", "n-init",
                 [](const TrainConfig& c) { return std::to_string(c.ema.n_init); },
                 [](TrainConfig& c, std::string_view v) {
                   const auto n = parse_uint("n-init", v);
                   if (n > 1) throw ConfigError("n-init: expected 0 or 1");
                   c.ema.n_init = static_cast<int>(n);
                 }});
    k.push_back({"quantizer", "update-empty",
                 [](const TrainConfig& c) { return std::string(c.ema.update_empty ? "yes" : "no"); },
                 [](TrainConfig& c, std::string_view v) {
                   c.ema.update_empty = parse_bool("update-empty", v);
                 }});
    k.push_back({"quantizer", "epsilon",
                 [](const TrainConfig& c) { return format_double(c.ema.epsilon); },
                 [](TrainConfig& c, std::string_view v) {
                   c.ema.epsilon = parse_double("epsilon", v);
                 }});
    k.push_back(enum_key("quantizer", "metric", &TrainConfig::metric, parse_metric));
    k.push_back(enum_key("quantizer", "codebook-init", &TrainConfig::codebook_init,
                         parse_init_scheme));
    k.push_back(double_key("quantizer", "init-scale", &TrainConfig::init_scale));
    k.push_back(double_key("quantizer", "init-offset", &TrainConfig::init_offset));

    k.push_back(size_key("model", "latents", &TrainConfig::latents));
    k.push_back(size_key("model", "embedding-dim", &TrainConfig::embedding_dim));
    k.push_back(size_key("model", "hidden", &TrainConfig::hidden));
    k.push_back(double_key("model", "alpha", &TrainConfig::alpha));
    k.push_back(double_key("model", "learning-rate", &TrainConfig::learning_rate));

    k.push_back(enum_key("data", "data", &TrainConfig::data, parse_data_kind));
    k.push_back(size_key("data", "data-dim", &TrainConfig::data_dim));
    k.push_back(size_key("data", "components", &TrainConfig::components));
    k.push_back(double_key("data", "separation", &TrainConfig::separation));
    k.push_back(string_key("data", "data-path", &TrainConfig::data_path));
    k.push_back(string_key("data", "split", &TrainConfig::split));
    k.push_back(size_key("data", "patch-size", &TrainConfig::patch_size));
    k.push_back(size_key("data", "stride", &TrainConfig::stride));
    k.push_back(enum_key("data", "normalize", &TrainConfig::normalize, parse_normalization));
    k.push_back(size_key("data", "holdout", &TrainConfig::holdout));
    return k;
  }();
  return table;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

const Key& require_key(std::string_view name) {
  const Key* k = find_key(name);
  if (!k) throw ConfigError("unknown key '" + std::string(name) + "'");
  return *k;
}

constexpr std::string_view kSections[] = {"run", "quantizer", "model", "data", "sweep"};

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  require_key(key).set(config, trim(value));
}

std::string get_config_value(const TrainConfig& config, std::string_view key) {
  return require_key(key).get(config);
}

void apply_override(TrainConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  set_config_value(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::string_view section;
  std::vector<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto hash = line.find_first_of("#;");
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        const auto name = trim(line.substr(1, line.size() - 2));
        if (std::find(std::begin(kSections), std::end(kSections), name) == std::end(kSections))
          throw ConfigError("unknown section [" + std::string(name) + "]");
        section = name;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected key = value");
      const auto name = trim(line.substr(0, eq));
      const auto value = trim(line.substr(eq + 1));
      if (section.empty()) throw ConfigError("'" + std::string(name) + "' outside any section");
      const Key& key = require_key(name);

      const std::string tag = std::string(section == "sweep" ? "sweep." : "") + std::string(name);
      if (std::find(seen.begin(), seen.end(), tag) != seen.end())
        throw ConfigError("duplicate key '" + std::string(name) + "'");
      seen.push_back(tag);

      if (section == "sweep") {
        SweepAxis axis{std::string(name), {}};
        for (auto v : split_list(value)) {
          TrainConfig probe;
          key.set(probe, v);
          axis.values.push_back(key.get(probe));
        }
        config.sweep.push_back(std::move(axis));
        continue;
      }
      if (key.section != section)
        throw ConfigError("key '" + std::string(name) + "' belongs in [" +
                          std::string(key.section) + "], not [" + std::string(section) + "]");
      key.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  std::string_view section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + std::string(section) + "]\n";
    }
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  if (!config.sweep.empty()) {
    out += "\n[sweep]\n";
    for (const auto& axis : config.sweep) {
      out += axis.key + " = ";
      for (std::size_t i = 0; i < axis.values.size(); ++i) {
        if (i) out += ", ";
        out += axis.values[i];
      }
      out += '\n';
    }
  }
  return out;
}

void validate(const TrainConfig& c) {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.steps == 0) fail("steps must be at least 1");
  if (c.batch_size == 0) fail("batch-size must be at least 1");
  if (c.eval_interval == 0) fail("eval-interval must be at least 1");
  if (c.validation_size == 0) fail("validation-size must be at least 1");
  if (c.threshold_window == 0) fail("threshold-window must be at least 1");
  if (c.seeds.empty()) fail("seeds: at least one seed required");
  if (c.output_dir.empty()) fail("output-dir must not be empty");

  if (c.grid_dims != 1 && c.grid_dims != 2) fail("grid-dims must be 1 or 2");
  if (c.grid_width == 0 || c.grid_height == 0) fail("grid extents must be at least 1");
  if (c.grid_dims == 1 && c.grid_height != 1) fail("grid-height must be 1 when grid-dims = 1");
  if (!(c.tau > 0.0)) fail("tau must be positive");
  if (c.grid_threshold && *c.grid_threshold < 0.0) fail("grid-threshold must be non-negative");
  if (!(c.ema.beta > 0.0 && c.ema.beta <= 1.0)) fail("beta must lie in (0, 1]");
  if (!(c.ema.epsilon > 0.0)) fail("epsilon must be positive");
  if (c.algorithm == Algorithm::ema_vq && c.neighborhood != NeighborhoodKind::identity)
    fail("algorithm ema-vq requires neighborhood = identity");
  if (!(c.init_scale > 0.0)) fail("init-scale must be positive");

  if (c.model == ModelKind::autoencoder) {
    if (c.latents == 0 || c.embedding_dim == 0 || c.hidden == 0)
      fail("latents, embedding-dim and hidden must be at least 1");
    if (c.alpha < 0.0) fail("alpha must be non-negative");
    if (!(c.learning_rate > 0.0)) fail("learning-rate must be positive");
  }

  switch (c.data) {
    case DataKind::gaussian_mixture:
      if (c.components == 0) fail("components must be at least 1");
      if (!(c.separation > 0.0)) fail("separation must be positive");
      [[fallthrough]];
    case DataKind::uniform_square:
      if (c.data_dim == 0) fail("data-dim must be at least 1");
      break;
    case DataKind::cifar10_binary:
      if (c.data_path.empty()) fail("data = cifar10-binary needs data-path");
      if (c.split != "train" && c.split != "test") fail("split must be train or test");
      if (c.patch_size == 0 || c.stride == 0) fail("patch-size and stride must be at least 1");
      if (c.patch_size > kCifarSide) fail("patch-size exceeds the image side");
      break;
    case DataKind::raw_vectors:
      if (c.data_path.empty()) fail("data = raw-vectors needs data-path");
      break;
  }

  for (const auto& axis : c.sweep) {
    if (axis.values.empty()) fail("sweep axis '" + axis.key + "' has no values");
    if (axis.key == "seeds" || axis.key == "output-dir")
      fail("'" + axis.key + "' cannot be swept");
  }
}

std::vector<std::pair<std::string, TrainConfig>> expand_sweep(const TrainConfig& config) {
  TrainConfig base = config;
  base.sweep.clear();
  std::vector<std::pair<std::string, TrainConfig>> cells{{"", base}};
  for (const auto& axis : config.sweep) {
    std::vector<std::pair<std::string, TrainConfig>> next;
    for (const auto& [name, cell] : cells) {
      for (const auto& value : axis.values) {
        TrainConfig c = cell;
        set_config_value(c, axis.key, value);
        next.emplace_back(name + (name.empty() ? "" : ",") + axis.key + "=" + value, c);
      }
    }
    cells = std::move(next);
  }
  return cells;
}

}  // namespace kvq
