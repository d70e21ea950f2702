// Serial reference vs OpenMP loss kernel. Run with OMP_NUM_THREADS set to
// compare thread counts; the outputs are bit-identical either way.

#include <benchmark/benchmark.h>

#include "edittrace/acoustic_loss.hpp"

using namespace edittrace;

namespace {

FeatureSequence input(const benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto label = state.range(1) ? AudioLabel::Edited : AudioLabel::BonaFide;
  return {random_features(rows, 768, 17, 1.0, 0.2), label};
}

void BM_LossReference(benchmark::State& state) {
  auto f = input(state);
  LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(reference::consistency_loss(f, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LossParallel(benchmark::State& state) {
  auto f = input(state);
  LossConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(consistency_loss(f, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GradientCheck(benchmark::State& state) {
  FeatureSequence f{random_features(static_cast<std::size_t>(state.range(0)), 32, 5, 1.0, 0.3), AudioLabel::Edited};
  for (auto _ : state) benchmark::DoNotOptimize(gradient_check(f, {}));
}

}  // namespace

// frames x {bona fide, edited}; 768-dim features as from a WavLM-sized encoder
BENCHMARK(BM_LossReference)->ArgsProduct({{64, 512, 4096}, {0, 1}});
BENCHMARK(BM_LossParallel)->ArgsProduct({{64, 512, 4096}, {0, 1}});
BENCHMARK(BM_GradientCheck)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
