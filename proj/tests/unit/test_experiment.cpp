#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kvq/codebook_file.hpp"
#include "kvq/error.hpp"
#include "kvq/experiment.hpp"
#include "kvq/metrics.hpp"

using namespace kvq;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "kvq_unit" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainConfig small_config() {
  TrainConfig c;
  c.steps = 60;
  c.batch_size = 8;
  c.eval_interval = 20;
  c.validation_size = 64;
  c.grid_width = 4;
  c.grid_height = 4;
  c.data_dim = 8;
  c.latents = 2;
  c.embedding_dim = 3;
  c.hidden = 8;
  c.components = 4;
  c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  return c;
}

}  // namespace

TEST(Experiment, TenSeedsTenTraces) {
  const TrainConfig c = small_config();
  const fs::path dir = fresh_dir("ten_seeds");
  const RunReport r = run_experiment(c, dir, 4);
  ASSERT_EQ(r.outcomes.size(), 10u);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const fs::path sd = dir / ("seed-" + std::to_string(s));
    EXPECT_EQ(r.outcomes[s - 1].seed, s);
    std::ifstream trace(sd / "trace.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(trace, line)) ++lines;
    EXPECT_EQ(lines, 61u);
    EXPECT_TRUE(fs::exists(sd / "eval.csv"));
    EXPECT_TRUE(fs::exists(sd / "codebook.kvq"));
    EXPECT_TRUE(fs::exists(sd / "model.kvqm"));
  }
  EXPECT_EQ(parse_config(slurp(dir / "config.txt")), c);
}

TEST(Experiment, RerunsAreByteIdenticalAcrossThreadCounts) {
  const TrainConfig c = small_config();
  const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  run_experiment(c, a, 1);
  run_experiment(c, b, 3);
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "seed-7" / "trace.csv"), slurp(b / "seed-7" / "trace.csv"));
  EXPECT_EQ(slurp(a / "seed-7" / "codebook.kvq"), slurp(b / "seed-7" / "codebook.kvq"));
}

TEST(Experiment, SummaryStatisticsMatchRecomputation) {
  const TrainConfig c = small_config();
  const fs::path dir = fresh_dir("stats");
  run_experiment(c, dir, 2);
  const json j = json::parse(slurp(dir / "summary.json"));
  ASSERT_EQ(j["seeds"].size(), 10u);
  for (const char* key : {"final_loss", "final_quantization_error", "perplexity", "utilization"}) {
    double sum = 0.0;
    std::vector<double> v;
    for (const auto& s : j["seeds"]) v.push_back(s[key].get<double>());
    for (double x : v) sum += x;
    const double mean = sum / 10.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(j["summary"][key]["mean"].get<double>(), mean, 1e-12 * std::abs(mean)) << key;
    EXPECT_NEAR(j["summary"][key]["std"].get<double>(), std::sqrt(ss / 9.0), 1e-9) << key;
    EXPECT_EQ(j["summary"][key]["n"].get<int>(), 10) << key;
  }
  EXPECT_EQ(j["config"]["steps"], "60");
  EXPECT_TRUE(j["diverged_seeds"].empty());
}

TEST(Experiment, DivergedSeedsAreExcluded) {
  TrainConfig c = small_config();
  c.seeds = {1, 2};
  c.learning_rate = 1e6;
  const fs::path dir = fresh_dir("diverged");
  const RunReport r = run_experiment(c, dir, 1);
  const json j = json::parse(slurp(dir / "summary.json"));
  for (const auto& o : r.outcomes) EXPECT_TRUE(o.diverged);
  EXPECT_EQ(j["diverged_seeds"].size(), 2u);
  EXPECT_EQ(j["summary"]["final_loss"]["n"].get<int>(), 0);
  EXPECT_TRUE(fs::exists(dir / "seed-1" / "trace.csv"));
}

TEST(Experiment, OutcomeMatchesItsArtifacts) {
  const TrainConfig c = small_config();
  const SeedRun run = run_seed(c, 3);
  ASSERT_TRUE(run.model.has_value());
  const DataSource data = make_data_source(c, 3);
  const Matrix val = data.validation(c.validation_size);
  const Matrix e = run.model->encode_all(val);
  EXPECT_NEAR(run.outcome.final_quantization_error, quantization_error(e, run.codebook), 1e-12);
  EXPECT_EQ(run.outcome.final_loss, run.trace.evals.back().val_recon_loss);
  std::vector<double> curve;
  for (const auto& ev : run.trace.evals) curve.push_back(ev.val_recon_loss);
  const auto idx = steps_to_threshold(curve, 0.1, c.threshold_window);
  ASSERT_TRUE(idx.has_value());
  EXPECT_EQ(run.outcome.steps_10, run.trace.evals[*idx].step);
  ASSERT_TRUE(run.outcome.topographic_error.has_value());
  EXPECT_EQ(*run.outcome.topographic_error, topographic_error(e, run.codebook, c.grid()));
}

TEST(Experiment, TopographicErrorUsesGridAdjacency) {
  TrainConfig c = small_config();
  c.model = ModelKind::none;
  c.data = DataKind::uniform_square;
  c.data_dim = 2;
  c.grid_threshold = 3.0;
  const SeedRun run = run_seed(c, 2);
  const Matrix val = make_data_source(c, 2).validation(c.validation_size);
  ASSERT_TRUE(run.outcome.topographic_error.has_value());
  EXPECT_EQ(*run.outcome.topographic_error,
            topographic_error(val, run.codebook, c.grid(), std::sqrt(2.0)));
}

TEST(Experiment, QuantizerOnlyRuns) {
  TrainConfig c = small_config();
  c.model = ModelKind::none;
  c.data = DataKind::uniform_square;
  c.data_dim = 2;
  c.seeds = {1};
  const fs::path dir = fresh_dir("no_model");
  const RunReport r = run_experiment(c, dir, 1);
  EXPECT_FALSE(fs::exists(dir / "seed-1" / "model.kvqm"));
  const CodebookFile f = load_codebook(dir / "seed-1" / "codebook.kvq");
  EXPECT_EQ(f.codebook.dim(), 2u);
  EXPECT_EQ(r.outcomes[0].final_loss, r.outcomes[0].final_quantization_error);
}

TEST(Experiment, RawVectorFiles) {
  const fs::path dir = fresh_dir("raw");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "v.txt");
    for (int i = 0; i < 40; ++i) out << i << ", " << 0.5 * i << "\n";
  }
  const Matrix m = read_vectors(dir / "v.txt");
  EXPECT_EQ(m.rows(), 40u);
  EXPECT_EQ(m(3, 1), 1.5);
  TrainConfig c = small_config();
  c.model = ModelKind::none;
  c.data = DataKind::raw_vectors;
  c.data_path = (dir / "v.txt").string();
  c.holdout = 10;
  c.seeds = {1};
  EXPECT_EQ(input_dim(c), 2u);
  EXPECT_NO_THROW(run_experiment(c, dir / "run", 1));
  {
    std::ofstream out(dir / "ragged.txt");
    out << "1 2\n3\n";
  }
  EXPECT_THROW(read_vectors(dir / "ragged.txt"), Error);
}

TEST(Experiment, SweepWritesOneDirectoryPerCell) {
  TrainConfig c = small_config();
  c.seeds = {1, 2};
  c.steps = 20;
  c.sweep.push_back({"tau", {"0.1", "1"}});
  const fs::path dir = fresh_dir("sweep");
  EXPECT_THROW(run_experiment(c, dir, 1), ConfigError);
  const auto reports = run_sweep(c, dir, 2);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "tau=0.1" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "tau=1" / "summary.json"));
}

#ifdef KVQ_CLI_PATH
TEST(Cli, TrainShowAndErrors) {
  const fs::path dir = fresh_dir("cli");
  const std::string cli = KVQ_CLI_PATH;
  const std::string train = cli + " train -s steps=10 -s grid-width=3 -s grid-height=3 --seeds 1..2 -o " +
                            dir.string() + " > /dev/null";
  EXPECT_EQ(std::system(train.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "seed-2" / "codebook.kvq"));
  const std::string inspect = cli + " inspect-codebook " + (dir / "seed-1" / "codebook.kvq").string() + " > /dev/null";
  EXPECT_EQ(std::system(inspect.c_str()), 0);
  const std::string perturb = cli + " perturb " + dir.string() + " --seed 1 --samples 16 > /dev/null";
  EXPECT_EQ(std::system(perturb.c_str()), 0);
  const std::string bad = cli + " show-config -s nokey=1 2> /dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
}
#endif
