#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/decision.hpp"
#include "trident/filter.hpp"
#include "trident/report_store.hpp"
#include "trident/rule_pipeline.hpp"

namespace trident::testing {

using json = nlohmann::json;

inline std::filesystem::path fixture_dir() { return TRIDENT_FIXTURE_DIR; }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("trident-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Writes raw reports plus a label sidecar and ingests them into
// <dir>/corpus. Returns the corpus root.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                          const std::vector<BehaviorReport>& reports) {
  auto raw = dir / "raw";
  std::filesystem::create_directories(raw);
  std::ofstream labels(dir / "labels.csv");
  labels << "sample_id,label,family,first_seen,sandbox\n";
  for (const auto& r : reports) {
    std::ofstream(raw / (r.sample_id + ".json")) << r.document.dump();
    char date[16];
    std::snprintf(date, sizeof date, "%04d-%02d-15", r.month.year, r.month.month);
    labels << r.sample_id << ',' << to_string(r.label) << ',' << r.family.value_or("") << ',' << date
           << ',' << r.sandbox << '\n';
  }
  labels.close();
  ingest(raw, dir / "labels.csv", dir / "corpus");
  return dir / "corpus";
}

// One jq case: {filter, input, values} or {filter, input, error}. Returns a
// description of the disagreement, or nothing when outputs agree.
inline std::optional<std::string> jq_case_mismatch(const json& c) {
  const std::string source = c.at("filter");
  filter::EvalOutcome outcome;
  try {
    outcome = filter::evaluate(filter::parse_filter(source), c.at("input"));
  } catch (const filter::CompileError& e) {
    return source + ": compile error " + e.what();
  }
  if (c.contains("values")) {
    const auto* values = std::get_if<std::vector<json>>(&outcome);
    if (!values) return source + ": expected values, got an error or timeout";
    if (json(*values) != c["values"]) {
      return source + ": expected " + c["values"].dump() + ", got " + json(*values).dump();
    }
    return std::nullopt;
  }
  const auto* err = std::get_if<filter::RuntimeError>(&outcome);
  if (!err) return source + ": expected error " + c["error"].dump();
  const std::string expected = c["error"];
  // Regex compile messages come from different engines; only their presence is compared.
  if (expected.rfind("Regex failure", 0) != 0 && err->message != expected) {
    return source + ": expected message " + expected + ", got " + err->message;
  }
  return std::nullopt;
}

inline BehaviorReport make_report(std::string id, Label label, json attributes, int big_size = 40,
                                  bool negative_marker = false) {
  BehaviorReport r;
  r.sample_id = std::move(id);
  r.label = label;
  r.month = kFirstBucket;
  r.sandbox = "Zenbox";
  json big = json::array();
  for (int i = 0; i < big_size; ++i) big.push_back(negative_marker && i == 0 ? -1 : i);
  r.document = {{"data", json::array({{{"attributes", std::move(attributes)}}})}, {"big", big}};
  r.size_bytes = canonical_dump(r.document).size();
  return r;
}

inline const std::vector<std::string>& banned_keys() {
  static const std::vector<std::string> kKeys = {
      "signature_matches", "mbc",  "mitre_attack_techniques", "tags",          "verdicts",
      "verdict_confidence", "sigma_analysis_results", "ids_alerts", "verdict_labels"};
  return kKeys;
}

inline bool is_banned_key(const std::string& key) {
  const auto& b = banned_keys();
  return std::find(b.begin(), b.end(), key) != b.end();
}

// Random document whose keys mix banned names, behavior-like names and
// near-misses such as "Tags" or "tags_extra".
inline json random_document(std::mt19937_64& rng, int depth = 0) {
  static const std::vector<std::string> kKeys = {
      "data", "attributes", "processes", "name", "files_dropped", "path", "ip_traffic",
      "Tags", "tags_extra", "verdict", "mbc2", "signature", "id", "type", "x"};
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::size_t kind = depth >= 4 ? 2 + pick(4) : pick(6);
  switch (kind) {
    case 0: {
      json obj = json::object();
      std::size_t n = pick(6);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& key = pick(3) == 0 ? banned_keys()[pick(banned_keys().size())] : kKeys[pick(kKeys.size())];
        obj[key] = random_document(rng, depth + 1);
      }
      return obj;
    }
    case 1: {
      json arr = json::array();
      std::size_t n = pick(5);
      for (std::size_t i = 0; i < n; ++i) arr.push_back(random_document(rng, depth + 1));
      return arr;
    }
    case 2:
      return static_cast<std::int64_t>(rng() % 2000) - 1000;
    case 3:
      return std::string("s") + std::to_string(pick(100));
    case 4:
      return pick(2) == 0;
    default:
      return nullptr;
  }
}

// Keys reachable without passing through a banned key.
inline void kept_keys(const json& v, std::multiset<std::string>& out, bool skip_banned) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (skip_banned && is_banned_key(it.key())) continue;
      out.insert(it.key());
      kept_keys(it.value(), out, skip_banned);
    }
  } else if (v.is_array()) {
    for (const auto& x : v) kept_keys(x, out, skip_banned);
  }
}

// Checks banned keys absent, other keys preserved, idempotence. Returns
// the number of documents violating any of them.
inline std::size_t sanitization_violations(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < count; ++i) {
    json doc = json::object();
    doc["data"] = random_document(rng);
    doc[banned_keys()[i % banned_keys().size()]] = random_document(rng, 3);
    json clean = sanitize_report(doc);
    std::multiset<std::string> expected, actual;
    kept_keys(doc, expected, true);
    kept_keys(clean, actual, false);
    bool ok = expected == actual && sanitize_report(clean) == clean;
    for (const auto& k : actual) ok = ok && !is_banned_key(k);
    if (!ok) ++bad;
  }
  return bad;
}

// Six rules over a crafted validation set: one good rule and one failure for
// each criterion. The slow rule builds a cartesian product on every file.
struct ValidationFixture {
  rules::ValidationSet set;
  std::vector<rules::DetectionRule> rules;
  std::vector<std::optional<rules::RejectReason>> expected;
  std::size_t benign = 0;
  std::size_t malicious = 0;
  rules::ValidationOptions options;
};

inline ValidationFixture validation_fixture() {
  ValidationFixture f;
  std::vector<BehaviorReport> reports;
  reports.push_back(make_report("origin", Label::malicious,
                                {{"marker", json::array({"evil"})}, {"files", json::array({"C:\\x\\payload.exe"})}, {"dns", json::array({"c2.example"})}},
                                40, true));
  for (int i = 0; i < 4; ++i) {
    reports.push_back(make_report("mal" + std::to_string(i), Label::malicious,
                                  {{"files", json::array({"C:\\x\\dropper.exe"})}, {"dns", json::array({"c2.example"})}}));
  }
  for (int i = 0; i < 25; ++i) {
    json files = json::array({"C:\\Windows\\system32\\kernel32.dll"});
    if (i % 5 == 0) files.push_back("C:\\Program Files\\App\\app.exe");
    reports.push_back(make_report("ben" + std::to_string(i), Label::benign, {{"files", files}}));
  }
  f.malicious = 5;
  f.benign = 25;
  f.set = rules::ValidationSet(std::move(reports));

  auto add = [&](std::string name, std::string body, std::optional<rules::RejectReason> reason) {
    rules::DetectionRule r;
    r.id = "origin#" + std::to_string(f.rules.size());
    r.name = name;
    r.origin = "origin";
    r.source = "def " + name + ": " + body + ";";
    f.rules.push_back(std::move(r));
    f.expected.push_back(reason);
  };
  add("rule_good", R"([.data[]?.attributes?.marker[]? | select(. == "evil")])", std::nullopt);
  add("rule_limit", R"([limit(1; .data[]?.attributes?.files[]?)])", rules::RejectReason::compile_error);
  add("rule_miss", R"([.data[]?.attributes?.dns[]? | select(. == "nowhere.test")])",
      rules::RejectReason::origin_miss);
  add("rule_exe", R"([.data[]?.attributes?.files[]? | select(endswith(".exe"))])",
      rules::RejectReason::false_positive);
  add("rule_marker_strict", R"([.data[0].attributes.marker[] | select(. == "evil")])",
      rules::RejectReason::error_rate);
  add("rule_slow", R"([{a: .big[], b: .big[], c: .big[]} | select(.a == -1 and .b == -1 and .c == -1)])",
      rules::RejectReason::timeout);
  f.options.budget = std::chrono::milliseconds(40);
  return f;
}

// Planted rule names: `groups` families of near-duplicate names plus
// `unique` unrelated names. Truth labels are the group index or -1.
struct PlantedNames {
  std::vector<std::string> names;
  std::vector<int> truth;
};

inline PlantedNames planted_names(std::uint64_t seed, int groups = 5, int unique = 20) {
  static const std::vector<std::vector<std::string>> kStems = {
      {"c2", "known", "ip"},         {"shadow", "copy", "deletion"}, {"run", "key", "persistence"},
      {"temp", "exe", "drop"},       {"process", "injection"},       {"keylogger", "hook"},
      {"disable", "defender"},       {"dga", "dns", "lookup"},       {"startup", "folder", "write"},
      {"mutex", "marker"}};
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::size_t> stems(kStems.size());
  for (std::size_t i = 0; i < stems.size(); ++i) stems[i] = i;
  std::shuffle(stems.begin(), stems.end(), rng);

  PlantedNames out;
  auto push = [&](std::string name, int label) {
    if (std::find(out.names.begin(), out.names.end(), name) != out.names.end()) return false;
    out.names.push_back(std::move(name));
    out.truth.push_back(label);
    return true;
  };
  for (int g = 0; g < groups; ++g) {
    const auto& parts = kStems[stems[static_cast<std::size_t>(g)]];
    std::string stem;
    for (const auto& p : parts) stem += (stem.empty() ? "" : "_") + p;
    // Ten variants that stay distinct after normalization.
    const std::vector<std::string> variants = {
        "rule_" + stem,          "detect_" + stem,      stem + "_v2",          "rule_" + stem + "_1",
        stem + "_rule",          "rule_" + stem + "_2", "detect_" + stem + "_v2", "rule_" + stem + "_3",
        "rule_" + stem + "_b",   stem + "_alt"};
    const std::size_t size = 3 + pick(8);
    for (std::size_t i = 0; i < size; ++i) push(variants[i], g);
  }
  // Noise names share no character 3-gram with any other name.
  auto bare = [](const std::string& n) { return n.rfind("rule_", 0) == 0 ? n.substr(5) : n; };
  auto grams = [](const std::string& n) {
    std::set<std::string> g;
    for (std::size_t i = 0; i + 3 <= n.size(); ++i) g.insert(n.substr(i, 3));
    return g;
  };
  std::set<std::string> taken;
  for (const auto& n : out.names) {
    auto g = grams(bare(n));
    taken.insert(g.begin(), g.end());
  }
  auto word = [&] {
    std::string w(4 + pick(5), 'a');
    for (auto& ch : w) ch = static_cast<char>('a' + pick(26));
    return w;
  };
  int added = 0;
  while (added < unique) {
    std::string name = word() + "_" + word();
    auto g = grams(name);
    if (std::any_of(g.begin(), g.end(), [&](const std::string& x) { return taken.count(x) > 0; })) continue;
    if (!push("rule_" + name, -1)) continue;
    taken.insert(g.begin(), g.end());
    ++added;
  }
  return out;
}

// Noise points become their own singleton labels so that ARI treats them
// as unclustered rather than as one shared cluster.
inline std::vector<int> singleton_noise(std::vector<int> labels) {
  int next = -2;
  for (auto& l : labels) {
    if (l == -1) l = next--;
  }
  return labels;
}

// Majority vote of three voters written out case by case: rules vote only
// when definitive, LLM vote only when rules and GBDT disagree, tiebreak by
// probability bands when rules are uncertain.
struct OracleCell {
  decision::RulesLabel rules;
  std::optional<llm::Verdict> llm;  // nothing when the LLM must not be asked
  double probability;
};

struct OracleOutcome {
  decision::Binary final;
  bool queried;
};

inline OracleOutcome decision_oracle(decision::RulesLabel rules, llm::Verdict llm, double p) {
  using decision::Binary;
  using decision::RulesLabel;
  const bool gbdt_mal = p >= 0.983;
  const Binary gbdt = gbdt_mal ? Binary::malicious : Binary::benign;
  // An LLM error votes malicious.
  const Binary llm_vote = llm == llm::Verdict::benign ? Binary::benign : Binary::malicious;

  if (rules == RulesLabel::malicious && gbdt_mal) return {Binary::malicious, false};
  if (rules == RulesLabel::benign && !gbdt_mal) return {Binary::benign, false};
  if (rules != RulesLabel::uncertain) {
    int mal_votes = (rules == RulesLabel::malicious) + gbdt_mal + (llm_vote == Binary::malicious);
    return {mal_votes >= 2 ? Binary::malicious : Binary::benign, true};
  }
  if (llm_vote == gbdt) return {gbdt, true};
  if (llm_vote == Binary::benign) return {p >= 0.99 ? Binary::malicious : Binary::benign, true};
  return {p >= 0.5 ? Binary::malicious : Binary::benign, true};
}

}  // namespace trident::testing
