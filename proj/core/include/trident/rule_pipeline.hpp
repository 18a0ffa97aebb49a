#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/llm_gateway.hpp"
#include "trident/report_store.hpp"

namespace trident::rules {

enum class RuleStatus { raw, good, rejected };
enum class RejectReason { compile_error, origin_miss, false_positive, error_rate, timeout };

std::string_view to_string(RuleStatus status);
std::string_view to_string(RejectReason reason);

/// Evaluations performed per criterion; a rule rejected at criterion k has
/// zero counts for every later criterion.
struct CriterionCounters {
  std::size_t compiles = 0;
  std::size_t origin_evals = 0;
  std::size_t benign_evals = 0;
  std::size_t error_rate_evals = 0;
  std::chrono::nanoseconds eval_time{0};

  json to_json() const;
};

struct DetectionRule {
  std::string id;  // "<origin>#<n>", unique within a store
  std::string name;
  std::string description;
  std::string source;
  std::string origin;
  RuleStatus status = RuleStatus::raw;
  std::optional<RejectReason> reason;
  std::size_t false_positives = 0;
  double error_fraction = 0.0;
  std::string note;
  std::optional<int> cluster_id;
  CriterionCounters counters;

  /// "FalsePositive(158)", "ErrorRate(0.125)", "CompileError", ...; empty when
  /// not rejected.
  std::string reason_text() const;

  json to_json() const;
  static DetectionRule from_json(const json& j);
};

void save_rules(const std::filesystem::path& path, const std::vector<DetectionRule>& rules);
std::vector<DetectionRule> load_rules(const std::filesystem::path& path);

struct GenerationLogEntry {
  std::string origin;
  std::size_t rule_count = 0;
  std::optional<llm::ErrorKind> error_kind;
};

struct GenerationResult {
  std::vector<DetectionRule> rules;
  std::vector<GenerationLogEntry> log;
};

/// One request_rules call per malicious sample of `month`, in manifest order.
GenerationResult generate_rules(const Corpus& corpus, YearMonth month, llm::Gateway& gateway,
                                std::size_t workers = 1);

/// The files a rule is checked against. `benign` feeds the zero-match
/// criterion and `error_scope` the error-rate criterion; both index into
/// `reports`.
class ValidationSet {
 public:
  ValidationSet() = default;
  /// error_rate_all_labels=false restricts the error-rate denominator to
  /// benign files.
  ValidationSet(std::vector<BehaviorReport> reports, bool error_rate_all_labels = true);

  static ValidationSet from_corpus(const Corpus& corpus, YearMonth month,
                                   bool error_rate_all_labels = true);

  const std::vector<BehaviorReport>& reports() const noexcept { return reports_; }
  const std::vector<std::size_t>& benign() const noexcept { return benign_; }
  const std::vector<std::size_t>& error_scope() const noexcept { return error_scope_; }
  const BehaviorReport* find(std::string_view sample_id) const;

 private:
  std::vector<BehaviorReport> reports_;
  std::vector<std::size_t> benign_;
  std::vector<std::size_t> error_scope_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct ValidationOptions {
  /// Total evaluation time for one rule over the validation set, measured as
  /// the sum of per-file evaluation durations.
  std::chrono::nanoseconds budget = std::chrono::seconds(300);
  double max_error_rate = 0.10;  // reject when fraction >= this
  std::size_t file_workers = 1;
};

/// Applies the five criteria in order and stops at the first failure:
/// compiles, matches origin, no benign matches, error rate below the limit,
/// total time within budget.
DetectionRule validate_rule(DetectionRule rule, const ValidationSet& set,
                            const ValidationOptions& options = {});

struct ValidationReport {
  std::vector<DetectionRule> rules;
  std::size_t generated = 0;
  std::size_t good = 0;
  std::map<RejectReason, std::size_t> rejected;

  json summary() const;
};

/// Validates every rule with `workers` rules in flight. With a checkpoint
/// path, finished rules are appended there and skipped on the next call.
ValidationReport validate_all(std::vector<DetectionRule> rules, const ValidationSet& set,
                              const ValidationOptions& options = {}, std::size_t workers = 1,
                              const std::optional<std::filesystem::path>& checkpoint = {});

}  // namespace trident::rules
