#include <benchmark/benchmark.h>

#include "kvq/autoencoder.hpp"
#include "kvq/codebook.hpp"
#include "kvq/data.hpp"
#include "kvq/quantizer.hpp"

namespace {

using namespace kvq;

void BM_BestMatchingUnit(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Codebook cb = Codebook::gaussian(k, d, 1);
  const Matrix x = DataSource::uniform_square(d, 2, 256).batch(0);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cb.best_matching_unit(x.row(i++ % x.rows())));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BestMatchingUnit)->Args({64, 4})->Args({512, 64});

void BM_MinibatchStep(benchmark::State& state) {
  const auto kind = static_cast<NeighborhoodKind>(state.range(0));
  const GridTopology grid = GridTopology::rect(16, 16);
  const DataSource data = DataSource::uniform_square(8, 3, 256);
  Quantizer q(Codebook::gaussian(grid.size(), 8, 1),
              QuantizerConfig{kind == NeighborhoodKind::identity ? Algorithm::ema_vq
                                                                 : Algorithm::ksom_minibatch,
                              NeighborhoodSchedule(kind, grid, 0.1), EmaParams{}});
  std::uint64_t i = 0;
  for (auto _ : state) {
    state.PauseTiming();
    const Matrix batch = data.batch(i++);
    state.ResumeTiming();
    benchmark::DoNotOptimize(q.step(batch));
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_MinibatchStep)
    ->Arg(static_cast<int>(NeighborhoodKind::identity))
    ->Arg(static_cast<int>(NeighborhoodKind::hard))
    ->Arg(static_cast<int>(NeighborhoodKind::gaussian));

void BM_AutoencoderStep(benchmark::State& state) {
  const DataSource data = DataSource::gaussian_mixture(16, 16, 4.0, 1, 32);
  ToyAutoencoder model(AutoencoderShape{16, 4, 4, 32}, 0.25, 0.005, 1);
  const GridTopology grid = GridTopology::rect(8, 8);
  Quantizer q(Codebook::gaussian(64, 4, 1),
              QuantizerConfig{Algorithm::ksom_minibatch,
                              NeighborhoodSchedule(NeighborhoodKind::hard, grid, 0.1), EmaParams{}});
  std::uint64_t i = 0;
  for (auto _ : state) {
    state.PauseTiming();
    const Matrix batch = data.batch(i++);
    state.ResumeTiming();
    benchmark::DoNotOptimize(train_step(model, q, batch));
  }
}
BENCHMARK(BM_AutoencoderStep);

}  // namespace

BENCHMARK_MAIN();
