#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trident/decision.hpp"
#include "trident/evaluation.hpp"
#include "trident/llm_gateway.hpp"
#include "trident/report_store.hpp"
#include "trident/rule_clustering.hpp"
#include "trident/rule_pipeline.hpp"

namespace trident {

enum class ProviderKind { replay, live };
std::string_view to_string(ProviderKind kind);

struct CorpusSettings {
  std::filesystem::path root;
  std::filesystem::path raw_dir;
  std::filesystem::path labels;
  std::vector<std::string> allowed_sandboxes = default_allowed_sandboxes();
  std::vector<std::string> excluded_sources = {"CAPA"};
};

struct RuleSettings {
  YearMonth training_month = kFirstBucket;
  std::filesystem::path store;     // default <run>/rules.jsonl
  std::filesystem::path clusters;  // default <run>/clusters.json
  clustering::HdbscanParams hdbscan;
};

struct GbdtSettings {
  std::filesystem::path scores;
  std::filesystem::path alt_scores;  // optional second model, evaluated as gbdt_alt
};

struct LlmSettings {
  ProviderKind provider = ProviderKind::replay;
  std::filesystem::path cache;
  llm::LiveOptions live;
  llm::GatewayOptions gateway;
};

struct ValidationSettings {
  rules::ValidationOptions options;
  bool error_rate_all_labels = true;
};

struct ClassifySettings {
  std::chrono::nanoseconds per_rule_budget = std::chrono::seconds(10);
};

struct EvaluationSettings {
  evaluation::ErrorMode error_mode = evaluation::ErrorMode::separate;
  bool pooled = false;
  std::vector<std::string> methods = {"rules", "trident", "gbdt"};
};

struct RunSettings {
  std::filesystem::path dir = "run";
  std::size_t workers = 1;
};

/// Every setting of the pipeline. Loaded from an INI document with one
/// section per module; keys are addressed as "section.key".
struct PipelineConfig {
  CorpusSettings corpus;
  RuleSettings rules;
  GbdtSettings gbdt;
  LlmSettings llm;
  decision::CombinerConfig decision;
  ValidationSettings validation;
  ClassifySettings classify;
  EvaluationSettings evaluation;
  RunSettings run;

  /// Defaults, then the file (if any), then the overrides in order. Unknown
  /// keys and malformed values raise ConfigError naming the key.
  static PipelineConfig load(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});

  /// Range checks on every numeric field.
  void validate() const;

  std::filesystem::path rule_store() const;
  std::filesystem::path cluster_file() const;

  /// INI text of the effective settings; load() of it round-trips.
  std::string to_ini() const;
  void save(const std::filesystem::path& path) const;
};

/// Throws ConfigError(field) unless `path` is set and exists.
void require_path(const std::filesystem::path& path, const std::string& field);

}  // namespace trident
