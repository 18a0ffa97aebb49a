#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "trident/rule_clustering.hpp"
#include "trident/synth_corpus.hpp"

namespace {

// Unique names: behavior variants with a numeric suffix plus random words.
std::vector<std::string> names(std::size_t n) {
  trident::synth::Rng rng(n);
  const auto& behaviors = trident::synth::behaviors();
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.chance(0.7)) {
      out.push_back(rng.pick(rng.pick(behaviors).names) + "_" + std::to_string(i));
    } else {
      out.push_back("rule_" + rng.lower_word(4, 9) + "_" + rng.lower_word(3, 8) + std::to_string(i));
    }
  }
  return out;
}

void BM_Vectorize(benchmark::State& state) {
  auto input = names(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(trident::clustering::vectorize(input));
}
BENCHMARK(BM_Vectorize)->Arg(100)->Arg(1000);

void BM_Hdbscan(benchmark::State& state) {
  auto vectors = trident::clustering::vectorize(names(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(trident::clustering::hdbscan(vectors));
}
BENCHMARK(BM_Hdbscan)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
