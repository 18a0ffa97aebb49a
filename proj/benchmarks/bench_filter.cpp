#include <benchmark/benchmark.h>

#include "trident/filter.hpp"
#include "trident/synth_corpus.hpp"

namespace {

using trident::json;

json sample_report(bool with_c2) {
  std::vector<std::string> ids = {"run_key_persistence", "temp_exe_drop"};
  if (with_c2) ids.push_back("c2_known_ip");
  return trident::synth::make_document(7, ids, true);
}

void BM_ParseRule(benchmark::State& state) {
  auto source = trident::synth::rule_source(trident::synth::behavior("c2_known_ip"), "rule_c2");
  for (auto _ : state) benchmark::DoNotOptimize(trident::filter::parse_filter(source));
}
BENCHMARK(BM_ParseRule);

void BM_EvaluateRule(benchmark::State& state) {
  const auto& b = trident::synth::behavior(state.range(0) ? "c2_known_ip" : "temp_exe_drop");
  auto ast = trident::filter::parse_filter(trident::synth::rule_source(b, "r"));
  auto doc = sample_report(true);
  for (auto _ : state) benchmark::DoNotOptimize(trident::filter::evaluate(ast, doc));
}
BENCHMARK(BM_EvaluateRule)->Arg(0)->Arg(1);

void BM_EvaluateAllReferenceRules(benchmark::State& state) {
  std::vector<trident::filter::FilterAst> rules;
  for (const auto& b : trident::synth::behaviors()) {
    rules.push_back(trident::filter::parse_filter(trident::synth::rule_source(b, b.names.front())));
  }
  auto doc = sample_report(false);
  for (auto _ : state) {
    std::size_t hits = 0;
    for (const auto& r : rules) {
      hits += trident::filter::rule_matches(trident::filter::evaluate(r, doc)) ==
              trident::filter::MatchResult::match;
    }
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rules.size()));
}
BENCHMARK(BM_EvaluateAllReferenceRules);

}  // namespace
