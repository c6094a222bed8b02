// Serial reference vs OpenMP loss kernel over the full 288-setting grid.

#include "graphtalk/kernels.hpp"
#include "graphtalk/tour_generator.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace graphtalk;

namespace {

const WozDataset& dataset(int examples) {
  static std::map<int, WozDataset> cache;
  auto it = cache.find(examples);
  if (it != cache.end()) return it->second;
  WozDataset data;
  for (int i = 0; i < examples; ++i) {
    TourGeneratorConfig config;
    config.rooms = 2 + i % 4;
    config.seed = 100 + static_cast<std::uint64_t>(i);
    data.examples.push_back({materialize_example_graph(generate_tour(config), "What did you see?"),
                             "What did you see?",
                             "Pepper saw a laptop in the office at 08:49 and then entered the hallway."});
  }
  return cache.emplace(examples, std::move(data)).first->second;
}

void BM_LossesSerial(benchmark::State& state) {
  const WozDataset& data = dataset(static_cast<int>(state.range(0)));
  const auto grid = parameter_space();
  MockScorer scorer;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::evaluate_losses_serial(data, scorer, grid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size() * data.size()));
}

void BM_LossesParallel(benchmark::State& state) {
  const WozDataset& data = dataset(static_cast<int>(state.range(0)));
  const auto grid = parameter_space();
  MockScorer scorer;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::evaluate_losses_parallel(data, scorer, grid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.size() * data.size()));
}

}  // namespace

BENCHMARK(BM_LossesSerial)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LossesParallel)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
