#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/filter.hpp"
#include "trident/llm_gateway.hpp"
#include "trident/report_store.hpp"
#include "trident/rule_clustering.hpp"
#include "trident/rule_pipeline.hpp"

namespace trident::decision {

using json = nlohmann::json;

enum class RulesLabel { benign, malicious, uncertain };
enum class Binary { benign, malicious };

std::string_view to_string(RulesLabel label);
std::string_view to_string(Binary label);

/// Which rules and clusters fired on one report; independent of tau.
struct RuleHits {
  std::set<int> matched_clusters;
  std::set<std::string> matched_rules;
  std::size_t error_count = 0;
  std::size_t timeout_count = 0;
};

struct RulesVerdict {
  RulesLabel verdict = RulesLabel::benign;
  std::size_t cluster_hits = 0;
  std::set<int> matched_clusters;
  std::set<std::string> matched_rules;
  std::size_t error_count = 0;
  std::size_t timeout_count = 0;
};

/// benign with no matching rule, malicious with more than tau cluster hits,
/// uncertain otherwise.
RulesVerdict rules_verdict(const RuleHits& hits, std::size_t tau);

/// Compiled good rules with their cluster ids. Immutable; evaluate() is
/// safe to call concurrently.
class RuleEngine {
 public:
  /// Throws DataError if a good rule does not compile or has no cluster.
  RuleEngine(const std::vector<rules::DetectionRule>& rules,
             const clustering::ClusterSet& clusters);

  /// A cluster hits when any member rule matches. Errors and timeouts count
  /// as non-matches.
  RuleHits evaluate(const json& document, std::chrono::nanoseconds per_rule_budget) const;

  std::size_t rule_count() const noexcept { return compiled_.size(); }

 private:
  struct Compiled {
    std::string id;
    int cluster;
    filter::FilterAst ast;
  };
  std::vector<Compiled> compiled_;
};

RulesVerdict classify_rules(const BehaviorReport& report, const RuleEngine& engine,
                            std::size_t tau,
                            std::chrono::nanoseconds per_rule_budget = std::chrono::seconds(10));

enum class LlmErrorPolicy { malicious, benign, abstain };
std::string_view to_string(LlmErrorPolicy policy);
LlmErrorPolicy parse_error_policy(std::string_view text);

struct CombinerConfig {
  std::size_t tau = 6;
  double boundary = 0.983;
  double tiebreak_high = 0.99;
  double tiebreak_low = 0.5;
  LlmErrorPolicy llm_error_policy = LlmErrorPolicy::malicious;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

Binary gbdt_verdict(double probability, const CombinerConfig& config);

/// Only meaningful when rules are uncertain and the LLM disagrees with GBDT.
Binary tiebreak(Binary llm, double gbdt_probability, const CombinerConfig& config = {});

enum class Path { agreement, llm_majority, tiebreak, gbdt_fallback };
std::string_view to_string(Path path);

struct TridentVerdict {
  Binary final = Binary::benign;
  Binary gbdt = Binary::benign;
  double gbdt_probability = 0;
  RulesVerdict rules;
  bool llm_queried = false;
  std::optional<llm::VerdictResponse> llm;
  std::optional<Binary> llm_vote;  // after the error policy; empty on abstain
  Path path = Path::agreement;
  json evidence;
};

/// Majority vote of rules, GBDT and (only when rules and GBDT differ) the
/// LLM, with the tiebreak for uncertain rules. `query_llm` is invoked at
/// most once.
TridentVerdict combine(const RulesVerdict& rules, double gbdt_probability,
                       const std::function<llm::VerdictResponse()>& query_llm,
                       const CombinerConfig& config);

TridentVerdict trident_classify(const BehaviorReport& report, const RulesVerdict& rules,
                                double gbdt_probability, llm::Gateway& gateway,
                                const CombinerConfig& config);

/// sample_id -> probability from a CSV with columns sample_id, probability.
std::map<std::string, double> load_gbdt_scores(const std::filesystem::path& path);

}  // namespace trident::decision
