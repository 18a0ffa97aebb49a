#include "trident/rule_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>

#include "trident/errors.hpp"
#include "trident/filter.hpp"
#include "trident/parallel.hpp"

namespace trident::rules {

std::string_view to_string(RuleStatus status) {
  switch (status) {
    case RuleStatus::raw:
      return "raw";
    case RuleStatus::good:
      return "good";
    case RuleStatus::rejected:
      return "rejected";
  }
  return "raw";
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::compile_error:
      return "CompileError";
    case RejectReason::origin_miss:
      return "OriginMiss";
    case RejectReason::false_positive:
      return "FalsePositive";
    case RejectReason::error_rate:
      return "ErrorRate";
    case RejectReason::timeout:
      return "Timeout";
  }
  return "CompileError";
}

namespace {

RuleStatus parse_status(std::string_view s) {
  if (s == "raw") return RuleStatus::raw;
  if (s == "good") return RuleStatus::good;
  if (s == "rejected") return RuleStatus::rejected;
  throw DataError("unknown rule status '" + std::string(s) + "'");
}

RejectReason parse_reason(std::string_view s) {
  for (auto r : {RejectReason::compile_error, RejectReason::origin_miss,
                 RejectReason::false_positive, RejectReason::error_rate, RejectReason::timeout}) {
    if (s.substr(0, s.find('(')) == to_string(r)) return r;
  }
  throw DataError("unknown reject reason '" + std::string(s) + "'");
}

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", f);
  return buf;
}

}  // namespace

json CriterionCounters::to_json() const {
  return {{"compiles", compiles},
          {"origin_evals", origin_evals},
          {"benign_evals", benign_evals},
          {"error_rate_evals", error_rate_evals},
          {"eval_ms", std::chrono::duration<double, std::milli>(eval_time).count()}};
}

std::string DetectionRule::reason_text() const {
  if (!reason) return {};
  std::string text(to_string(*reason));
  if (*reason == RejectReason::false_positive) {
    text += "(" + std::to_string(false_positives) + ")";
  } else if (*reason == RejectReason::error_rate) {
    text += "(" + format_fraction(error_fraction) + ")";
  }
  return text;
}

json DetectionRule::to_json() const {
  json j = {{"id", id},
            {"name", name},
            {"description", description},
            {"source", source},
            {"origin", origin},
            {"status", to_string(status)},
            {"reason", reason ? json(reason_text()) : json(nullptr)},
            {"cluster_id", cluster_id ? json(*cluster_id) : json(nullptr)}};
  if (status != RuleStatus::raw) {
    j["false_positives"] = false_positives;
    j["error_fraction"] = error_fraction;
    j["counters"] = counters.to_json();
  }
  if (!note.empty()) j["note"] = note;
  return j;
}

DetectionRule DetectionRule::from_json(const json& j) {
  DetectionRule r;
  try {
    r.id = j.at("id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.description = j.value("description", "");
    r.source = j.at("source").get<std::string>();
    r.origin = j.value("origin", "");
    r.status = parse_status(j.value("status", "raw"));
    if (j.contains("reason") && j["reason"].is_string()) r.reason = parse_reason(j["reason"].get<std::string>());
    if (j.contains("cluster_id") && j["cluster_id"].is_number_integer()) {
      r.cluster_id = j["cluster_id"].get<int>();
    }
    r.false_positives = j.value("false_positives", std::size_t{0});
    r.error_fraction = j.value("error_fraction", 0.0);
    r.note = j.value("note", "");
    if (j.contains("counters") && j["counters"].is_object()) {
      const auto& c = j["counters"];
      r.counters.compiles = c.value("compiles", std::size_t{0});
      r.counters.origin_evals = c.value("origin_evals", std::size_t{0});
      r.counters.benign_evals = c.value("benign_evals", std::size_t{0});
      r.counters.error_rate_evals = c.value("error_rate_evals", std::size_t{0});
      r.counters.eval_time = std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::duration<double, std::milli>(c.value("eval_ms", 0.0)));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed rule record: ") + e.what());
  }
  return r;
}

void save_rules(const std::filesystem::path& path, const std::vector<DetectionRule>& rules) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write rule store " + path.string());
  for (const auto& r : rules) out << r.to_json().dump() << '\n';
}

std::vector<DetectionRule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read rule store " + path.string());
  std::vector<DetectionRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
    }
    rules.push_back(DetectionRule::from_json(j));
  }
  return rules;
}

GenerationResult generate_rules(const Corpus& corpus, YearMonth month, llm::Gateway& gateway,
                                std::size_t workers) {
  std::vector<const ManifestEntry*> samples;
  for (const auto& e : corpus.manifest().entries()) {
    if (e.month == month && e.label == Label::malicious) samples.push_back(&e);
  }
  std::vector<llm::GeneratedRuleSet> sets(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    sets[i] = gateway.request_rules(corpus.load(*samples[i]));
  });

  GenerationResult result;
  for (auto& set : sets) {
    result.log.push_back({set.origin, set.rules.size(), set.error_kind});
    std::size_t n = 0;
    for (auto& g : set.rules) {
      DetectionRule r;
      r.id = set.origin + "#" + std::to_string(n++);
      r.name = std::move(g.name);
      r.description = std::move(g.description);
      r.source = std::move(g.source);
      r.origin = set.origin;
      result.rules.push_back(std::move(r));
    }
  }
  return result;
}

ValidationSet::ValidationSet(std::vector<BehaviorReport> reports, bool error_rate_all_labels)
    : reports_(std::move(reports)) {
  for (std::size_t i = 0; i < reports_.size(); ++i) {
    const auto& r = reports_[i];
    index_.emplace(r.sample_id, i);
    if (r.label == Label::unknown) continue;
    if (r.label == Label::benign) benign_.push_back(i);
    if (error_rate_all_labels || r.label == Label::benign) error_scope_.push_back(i);
  }
}

ValidationSet ValidationSet::from_corpus(const Corpus& corpus, YearMonth month,
                                         bool error_rate_all_labels) {
  return ValidationSet(corpus.load_month(month), error_rate_all_labels);
}

const BehaviorReport* ValidationSet::find(std::string_view sample_id) const {
  auto it = index_.find(sample_id);
  return it == index_.end() ? nullptr : &reports_[it->second];
}

namespace {

using Clock = std::chrono::steady_clock;

// Shared across file workers for one rule.
struct Scan {
  const filter::FilterAst& ast;
  const ValidationOptions& options;
  std::atomic<std::int64_t> spent_ns{0};
  std::atomic<bool> timed_out{false};

  filter::MatchResult run(const json& doc) {
    auto remaining = options.budget - std::chrono::nanoseconds(spent_ns.load());
    if (remaining <= std::chrono::nanoseconds::zero()) {
      timed_out = true;
      return filter::MatchResult::timeout;
    }
    filter::Budget budget;
    budget.time = remaining;
    auto start = Clock::now();
    auto outcome = filter::evaluate(ast, doc, budget);
    spent_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
    auto m = filter::rule_matches(outcome);
    if (m == filter::MatchResult::timeout ||
        std::chrono::nanoseconds(spent_ns.load()) > options.budget) {
      timed_out = true;
      return filter::MatchResult::timeout;
    }
    return m;
  }
};

DetectionRule reject(DetectionRule rule, RejectReason reason) {
  rule.status = RuleStatus::rejected;
  rule.reason = reason;
  return rule;
}

}  // namespace

DetectionRule validate_rule(DetectionRule rule, const ValidationSet& set,
                            const ValidationOptions& options) {
  rule.status = RuleStatus::raw;
  rule.reason.reset();
  rule.false_positives = 0;
  rule.error_fraction = 0.0;
  rule.counters = {};

  // 1. Compiles.
  ++rule.counters.compiles;
  std::optional<filter::FilterAst> ast;
  try {
    ast = filter::parse_filter(rule.source);
  } catch (const filter::CompileError& e) {
    rule.note = e.what();
    return reject(std::move(rule), RejectReason::compile_error);
  }

  Scan scan{*ast, options};
  auto finish_timing = [&] { rule.counters.eval_time = std::chrono::nanoseconds(scan.spent_ns.load()); };

  // 2. Matches its origin report.
  const BehaviorReport* origin = set.find(rule.origin);
  if (!origin) {
    rule.note = "origin report " + rule.origin + " not in validation set";
    return reject(std::move(rule), RejectReason::origin_miss);
  }
  ++rule.counters.origin_evals;
  auto origin_result = scan.run(origin->document);
  finish_timing();
  if (origin_result == filter::MatchResult::timeout) {
    return reject(std::move(rule), RejectReason::timeout);
  }
  if (origin_result != filter::MatchResult::match) {
    rule.note = std::string("origin evaluation: ") + std::string(filter::to_string(origin_result));
    return reject(std::move(rule), RejectReason::origin_miss);
  }

  // 3. No benign matches. Errors here are kept for criterion 4.
  const auto& reports = set.reports();
  const auto& benign = set.benign();
  std::vector<filter::MatchResult> benign_results(benign.size(), filter::MatchResult::no_match);
  std::atomic<std::size_t> evals{0};
  parallel_for(benign.size(), options.file_workers, [&](std::size_t i) {
    if (scan.timed_out) return;
    ++evals;
    benign_results[i] = scan.run(reports[benign[i]].document);
  });
  rule.counters.benign_evals = evals;
  finish_timing();
  if (scan.timed_out) return reject(std::move(rule), RejectReason::timeout);
  rule.false_positives = static_cast<std::size_t>(
      std::count(benign_results.begin(), benign_results.end(), filter::MatchResult::match));
  if (rule.false_positives > 0) return reject(std::move(rule), RejectReason::false_positive);

  // 4. Error rate over the error scope, reusing benign outcomes.
  std::map<std::size_t, filter::MatchResult> known;
  for (std::size_t i = 0; i < benign.size(); ++i) known.emplace(benign[i], benign_results[i]);
  std::size_t errors = 0;
  std::vector<std::size_t> pending;
  for (auto idx : set.error_scope()) {
    auto it = known.find(idx);
    if (it == known.end()) {
      pending.push_back(idx);
    } else if (it->second == filter::MatchResult::error) {
      ++errors;
    }
  }
  std::atomic<std::size_t> pending_errors{0};
  evals = 0;
  parallel_for(pending.size(), options.file_workers, [&](std::size_t i) {
    if (scan.timed_out) return;
    ++evals;
    if (scan.run(reports[pending[i]].document) == filter::MatchResult::error) ++pending_errors;
  });
  rule.counters.error_rate_evals = evals;
  finish_timing();
  if (scan.timed_out) return reject(std::move(rule), RejectReason::timeout);
  errors += pending_errors;
  const auto denominator = set.error_scope().size();
  rule.error_fraction = denominator ? static_cast<double>(errors) / static_cast<double>(denominator) : 0.0;
  if (rule.error_fraction >= options.max_error_rate) {
    return reject(std::move(rule), RejectReason::error_rate);
  }

  // 5. Total time within budget.
  if (rule.counters.eval_time > options.budget) return reject(std::move(rule), RejectReason::timeout);

  rule.status = RuleStatus::good;
  return rule;
}

json ValidationReport::summary() const {
  json by_reason = json::object();
  for (auto r : {RejectReason::compile_error, RejectReason::origin_miss,
                 RejectReason::false_positive, RejectReason::error_rate, RejectReason::timeout}) {
    auto it = rejected.find(r);
    by_reason[std::string(to_string(r))] = it == rejected.end() ? 0 : it->second;
  }
  std::size_t total_rejected = 0;
  for (const auto& [_, n] : rejected) total_rejected += n;
  return {{"generated", generated},
          {"good", good},
          {"rejected", total_rejected},
          {"rejected_by_reason", by_reason}};
}

ValidationReport validate_all(std::vector<DetectionRule> rules, const ValidationSet& set,
                              const ValidationOptions& options, std::size_t workers,
                              const std::optional<std::filesystem::path>& checkpoint) {
  std::map<std::string, DetectionRule> done;
  if (checkpoint && std::filesystem::exists(*checkpoint)) {
    for (auto& r : load_rules(*checkpoint)) done.insert_or_assign(r.id, std::move(r));
  }
  std::ofstream sink;
  if (checkpoint) {
    sink.open(*checkpoint, std::ios::app);
    if (!sink) throw DataError("cannot open checkpoint " + checkpoint->string());
  }
  std::mutex sink_mutex;

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    auto it = done.find(rules[i].id);
    if (it != done.end() && it->second.status != RuleStatus::raw &&
        it->second.source == rules[i].source) {
      rules[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }
  parallel_for(todo.size(), workers, [&](std::size_t k) {
    auto& slot = rules[todo[k]];
    slot = validate_rule(std::move(slot), set, options);
    if (checkpoint) {
      std::lock_guard lock(sink_mutex);
      sink << slot.to_json().dump() << '\n' << std::flush;
    }
  });

  ValidationReport report;
  report.generated = rules.size();
  for (const auto& r : rules) {
    if (r.status == RuleStatus::good) {
      ++report.good;
    } else if (r.reason) {
      ++report.rejected[*r.reason];
    }
  }
  report.rules = std::move(rules);
  return report;
}

}  // namespace trident::rules
