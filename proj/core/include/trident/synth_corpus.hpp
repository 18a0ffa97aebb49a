#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/report_store.hpp"

namespace trident::synth {

using json = nlohmann::json;

/// mt19937_64 with distribution helpers whose output does not depend on the
/// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool chance(double p) { return uniform() < p; }
  std::size_t index(std::size_t size) {
    return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(size) - 1));
  }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[index(items.size())];
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[index(i)]);
  }
  std::string lower_word(int min_len, int max_len);
  std::string hex(int len);

 private:
  std::mt19937_64 engine_;
};

struct Behavior {
  std::string id;
  std::string description;
  std::string rule_body;            // filter body without the def header
  std::vector<std::string> names;   // rule name variants used in replies
};

/// The injectable malicious behaviors.
const std::vector<Behavior>& behaviors();
const Behavior& behavior(std::string_view id);

/// "def <name>: <body>;"
std::string rule_source(const Behavior& behavior, std::string_view name);

/// Rules planted in generated replies that fail validation: a proxy-settings
/// rule (benign matches), an unsupported builtin, an unguarded access that
/// errors on many files, and a C2 rule with the wrong address.
std::string proxy_rule_source();
std::string unsupported_rule_source();
std::string error_prone_rule_source();
std::string wrong_ip_rule_source();

/// A behavior-only report (already free of banned keys) embedding the given
/// behaviors plus benign noise. Deterministic in its arguments.
json make_document(std::uint64_t seed, const std::vector<std::string>& behavior_ids,
                   bool proxy_setting);

struct SynthOptions {
  std::uint64_t seed = 42;
  int months = 3;
  YearMonth start = kFirstBucket;
  std::size_t malware_per_month = 200;
  std::size_t benign_per_month = 200;
  /// Fraction of verdict replies that are provider refusals.
  double llm_error_rate = 0.02;
  std::size_t initial_families = 6;
  std::size_t new_families_per_month = 3;
  /// Share of later-month malware drawn from families absent in month one.
  double new_family_share = 0.3;
  double proxy_rate = 0.15;
  /// Extra reports from excluded sources plus unlabeled samples.
  bool include_ingest_noise = true;
};

struct SynthSummary {
  std::size_t labeled_reports = 0;
  std::size_t malware = 0;
  std::size_t benign = 0;
  std::size_t unlabeled = 0;
  std::size_t excluded_source = 0;
  std::size_t cache_entries = 0;
  std::size_t reference_rules = 0;
  json to_json() const;
};

/// Writes raw/, labels.csv, gbdt_scores.csv, llm_cache.jsonl and
/// reference_rules.jsonl under `out_dir`. Every reference rule is checked
/// against every generated report: it must match exactly the reports that
/// embed its behavior.
SynthSummary generate(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace trident::synth
