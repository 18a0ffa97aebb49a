#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/config.hpp"
#include "trident/decision.hpp"
#include "trident/evaluation.hpp"
#include "trident/llm_gateway.hpp"
#include "trident/report_store.hpp"
#include "trident/rule_clustering.hpp"
#include "trident/rule_pipeline.hpp"

namespace trident::pipeline {

using json = nlohmann::json;

/// Replay answers from llm.cache only; live calls the endpoint and appends
/// to the same cache.
std::shared_ptr<llm::Provider> make_provider(const PipelineConfig& config);
std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& config);

/// In-range months after the training month, ascending.
std::vector<YearMonth> test_months(const CorpusManifest& manifest, YearMonth training_month);

IngestResult run_ingest(const PipelineConfig& config);

/// Raw rules for the training month go to the rule store; the per-sample
/// log goes to <run>/generation_log.jsonl.
rules::GenerationResult run_generate(const PipelineConfig& config, llm::Gateway& gateway);

/// Validates the rule store in place, resuming from
/// <run>/validation_checkpoint.jsonl.
rules::ValidationReport run_validate(const PipelineConfig& config);

/// Clusters the good rules, writes the cluster file and stamps cluster ids
/// into the rule store.
clustering::ClusterSet run_cluster(const PipelineConfig& config);

struct ClassifySummary {
  std::size_t samples = 0;
  std::size_t malicious = 0;
  std::size_t benign = 0;
  std::size_t uncertain = 0;
  std::size_t llm_queries = 0;
  std::size_t unscored = 0;
  json to_json() const;
};

/// Rules method with LLM deferral for uncertain samples:
/// <run>/rules_verdicts.jsonl sorted by (month, sample_id).
ClassifySummary run_classify(const PipelineConfig& config, llm::Gateway& gateway);

struct TridentSummary {
  std::size_t samples = 0;
  std::size_t malicious = 0;
  std::size_t llm_queries = 0;
  std::size_t unscored = 0;
  std::map<std::string, std::size_t> paths;
  json to_json() const;
};

/// Full majority vote: <run>/trident_verdicts.jsonl sorted by
/// (month, sample_id). Samples without a GBDT score or whose LLM call
/// failed are logged as unscored.
TridentSummary run_trident(const PipelineConfig& config, llm::Gateway& gateway);

/// Reads the verdict logs and score files for `config.evaluation.methods`
/// and writes metrics.csv, confusion.csv, sizes.csv and summary.md under
/// <run>/evaluation.
std::vector<evaluation::MethodResult> run_evaluate(const PipelineConfig& config);

/// Predictions of one method over the test months.
std::vector<evaluation::ScoredSample> load_predictions(const PipelineConfig& config,
                                                       const CorpusManifest& manifest,
                                                       const std::string& method);

/// Records of a JSONL file in order.
std::vector<json> read_jsonl(const std::filesystem::path& path);

}  // namespace trident::pipeline
