#include "trident/decision.hpp"

#include <cmath>

#include "trident/csv.hpp"
#include "trident/errors.hpp"

namespace trident::decision {

std::string_view to_string(RulesLabel label) {
  switch (label) {
    case RulesLabel::benign:
      return "benign";
    case RulesLabel::malicious:
      return "malicious";
    case RulesLabel::uncertain:
      return "uncertain";
  }
  return "uncertain";
}

std::string_view to_string(Binary label) {
  return label == Binary::malicious ? "malicious" : "benign";
}

std::string_view to_string(LlmErrorPolicy policy) {
  switch (policy) {
    case LlmErrorPolicy::malicious:
      return "malicious";
    case LlmErrorPolicy::benign:
      return "benign";
    case LlmErrorPolicy::abstain:
      return "abstain";
  }
  return "malicious";
}

LlmErrorPolicy parse_error_policy(std::string_view text) {
  if (text == "malicious") return LlmErrorPolicy::malicious;
  if (text == "benign") return LlmErrorPolicy::benign;
  if (text == "abstain") return LlmErrorPolicy::abstain;
  throw ConfigError("decision.llm_error_policy",
                    "expected malicious, benign or abstain, got '" + std::string(text) + "'");
}

std::string_view to_string(Path path) {
  switch (path) {
    case Path::agreement:
      return "agreement";
    case Path::llm_majority:
      return "llm_majority";
    case Path::tiebreak:
      return "tiebreak";
    case Path::gbdt_fallback:
      return "gbdt_fallback";
  }
  return "agreement";
}

RulesVerdict rules_verdict(const RuleHits& hits, std::size_t tau) {
  RulesVerdict v;
  v.cluster_hits = hits.matched_clusters.size();
  v.matched_clusters = hits.matched_clusters;
  v.matched_rules = hits.matched_rules;
  v.error_count = hits.error_count;
  v.timeout_count = hits.timeout_count;
  if (hits.matched_rules.empty()) {
    v.verdict = RulesLabel::benign;
  } else if (v.cluster_hits > tau) {
    v.verdict = RulesLabel::malicious;
  } else {
    v.verdict = RulesLabel::uncertain;
  }
  return v;
}

RuleEngine::RuleEngine(const std::vector<rules::DetectionRule>& rules,
                       const clustering::ClusterSet& clusters) {
  for (const auto& r : rules) {
    if (r.status != rules::RuleStatus::good) continue;
    auto it = clusters.cluster_of_rule.find(r.id);
    if (it == clusters.cluster_of_rule.end()) {
      throw DataError("good rule " + r.id + " is not assigned to any cluster");
    }
    try {
      compiled_.push_back({r.id, it->second, filter::parse_filter(r.source)});
    } catch (const filter::CompileError& e) {
      throw DataError("good rule " + r.id + " no longer compiles: " + e.what());
    }
  }
}

RuleHits RuleEngine::evaluate(const json& document, std::chrono::nanoseconds per_rule_budget) const {
  RuleHits hits;
  filter::Budget budget;
  budget.time = per_rule_budget;
  for (const auto& rule : compiled_) {
    switch (filter::rule_matches(filter::evaluate(rule.ast, document, budget))) {
      case filter::MatchResult::match:
        hits.matched_rules.insert(rule.id);
        hits.matched_clusters.insert(rule.cluster);
        break;
      case filter::MatchResult::error:
        ++hits.error_count;
        break;
      case filter::MatchResult::timeout:
        ++hits.timeout_count;
        break;
      case filter::MatchResult::no_match:
        break;
    }
  }
  return hits;
}

RulesVerdict classify_rules(const BehaviorReport& report, const RuleEngine& engine,
                            std::size_t tau, std::chrono::nanoseconds per_rule_budget) {
  return rules_verdict(engine.evaluate(report.document, per_rule_budget), tau);
}

void CombinerConfig::validate() const {
  auto unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  if (!std::isfinite(boundary) || boundary <= 0.0 || boundary >= 1.0) {
    throw ConfigError("decision.boundary", "must lie strictly between 0 and 1");
  }
  if (!unit(tiebreak_low)) throw ConfigError("decision.tiebreak_low", "must lie in [0, 1]");
  if (!unit(tiebreak_high)) throw ConfigError("decision.tiebreak_high", "must lie in [0, 1]");
  if (tiebreak_low > tiebreak_high) {
    throw ConfigError("decision.tiebreak_low", "must not exceed decision.tiebreak_high");
  }
}

Binary gbdt_verdict(double probability, const CombinerConfig& config) {
  return probability >= config.boundary ? Binary::malicious : Binary::benign;
}

Binary tiebreak(Binary llm, double gbdt_probability, const CombinerConfig& config) {
  double threshold = llm == Binary::benign ? config.tiebreak_high : config.tiebreak_low;
  return gbdt_probability >= threshold ? Binary::malicious : Binary::benign;
}

TridentVerdict combine(const RulesVerdict& rules, double gbdt_probability,
                       const std::function<llm::VerdictResponse()>& query_llm,
                       const CombinerConfig& config) {
  TridentVerdict v;
  v.rules = rules;
  v.gbdt_probability = gbdt_probability;
  v.gbdt = gbdt_verdict(gbdt_probability, config);
  v.evidence = json::object();
  v.evidence["gbdt_probability"] = gbdt_probability;
  if (!rules.matched_rules.empty()) v.evidence["matched_rules"] = rules.matched_rules;

  const bool definitive = rules.verdict != RulesLabel::uncertain;
  const Binary rules_binary = rules.verdict == RulesLabel::malicious ? Binary::malicious : Binary::benign;
  if (definitive && rules_binary == v.gbdt) {
    v.final = v.gbdt;
    v.path = Path::agreement;
    return v;
  }

  v.llm_queried = true;
  v.llm = query_llm();
  switch (v.llm->verdict) {
    case llm::Verdict::malicious:
      v.llm_vote = Binary::malicious;
      break;
    case llm::Verdict::benign:
      v.llm_vote = Binary::benign;
      break;
    case llm::Verdict::error:
      v.evidence["llm_error"] = v.llm->error_kind ? to_string(*v.llm->error_kind) : "unknown";
      if (config.llm_error_policy == LlmErrorPolicy::malicious) v.llm_vote = Binary::malicious;
      if (config.llm_error_policy == LlmErrorPolicy::benign) v.llm_vote = Binary::benign;
      break;
  }
  if (!v.llm->explanation.empty() && v.llm->verdict != llm::Verdict::error) {
    v.evidence["llm_explanation"] = v.llm->explanation;
  }

  if (!v.llm_vote) {
    v.final = v.gbdt;
    v.path = Path::gbdt_fallback;
  } else if (definitive) {
    v.final = *v.llm_vote;
    v.path = Path::llm_majority;
  } else if (*v.llm_vote == v.gbdt) {
    v.final = v.gbdt;
    v.path = Path::agreement;
  } else {
    v.final = tiebreak(*v.llm_vote, gbdt_probability, config);
    v.path = Path::tiebreak;
  }
  return v;
}

TridentVerdict trident_classify(const BehaviorReport& report, const RulesVerdict& rules,
                                double gbdt_probability, llm::Gateway& gateway,
                                const CombinerConfig& config) {
  return combine(rules, gbdt_probability, [&] { return gateway.request_verdict(report); }, config);
}

std::map<std::string, double> load_gbdt_scores(const std::filesystem::path& path) {
  std::map<std::string, double> scores;
  for (const auto& row : csv::read_file(path)) {
    auto id = row.find("sample_id");
    auto p = row.find("probability");
    if (id == row.end() || p == row.end()) {
      throw DataError(path.string() + ": expected columns sample_id, probability");
    }
    double value = 0;
    try {
      std::size_t used = 0;
      value = std::stod(p->second, &used);
      if (used != p->second.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad probability '" + p->second + "' for " + id->second);
    }
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      throw DataError(path.string() + ": probability out of [0, 1] for " + id->second);
    }
    if (!scores.emplace(id->second, value).second) {
      throw DataError(path.string() + ": duplicate sample_id " + id->second);
    }
  }
  return scores;
}

}  // namespace trident::decision
