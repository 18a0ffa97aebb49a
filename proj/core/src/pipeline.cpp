#include "trident/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "trident/parallel.hpp"
#include "trident/errors.hpp"

namespace trident::pipeline {

namespace fs = std::filesystem;
using evaluation::Prediction;

namespace {

void write_json(const fs::path& path, const json& value) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << value.dump(2) << '\n';
}

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

Corpus open_corpus(const PipelineConfig& config) {
  require_path(config.corpus.root, "corpus.root");
  return Corpus(config.corpus.root);
}

std::vector<const ManifestEntry*> test_entries(const CorpusManifest& manifest, YearMonth training) {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : manifest.entries()) {
    if (!e.out_of_range && e.month > training) out.push_back(&e);
  }
  std::sort(out.begin(), out.end(), [](const ManifestEntry* a, const ManifestEntry* b) {
    return std::tie(a->month, a->sample_id) < std::tie(b->month, b->sample_id);
  });
  return out;
}

json rules_json(const decision::RulesVerdict& v) {
  return {{"verdict", to_string(v.verdict)},
          {"cluster_hits", v.cluster_hits},
          {"matched_clusters", v.matched_clusters},
          {"matched_rules", v.matched_rules},
          {"errors", v.error_count},
          {"timeouts", v.timeout_count}};
}

json llm_json(const llm::VerdictResponse& r) {
  json j = {{"verdict", to_string(r.verdict)}, {"explanation", r.explanation}};
  j["error_kind"] = r.error_kind ? json(to_string(*r.error_kind)) : json(nullptr);
  return j;
}

json base_record(const ManifestEntry& e) {
  return {{"sample_id", e.sample_id}, {"month", e.month.str()}, {"label", to_string(e.label)}};
}

decision::RuleEngine load_engine(const PipelineConfig& config) {
  auto store = config.rule_store();
  auto clusters = config.cluster_file();
  require_path(store, "rules.store");
  require_path(clusters, "rules.clusters");
  return decision::RuleEngine(rules::load_rules(store), clustering::ClusterSet::load(clusters));
}

Prediction prediction_of(const llm::VerdictResponse& r) {
  switch (r.verdict) {
    case llm::Verdict::malicious:
      return Prediction::malicious;
    case llm::Verdict::benign:
      return Prediction::benign;
    case llm::Verdict::error:
      return Prediction::error;
  }
  return Prediction::error;
}

}  // namespace

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::shared_ptr<llm::Provider> make_provider(const PipelineConfig& config) {
  const auto& s = config.llm;
  if (s.provider == ProviderKind::replay) {
    require_path(s.cache, "llm.cache");
    return std::make_shared<llm::ReplayProvider>(std::make_shared<const llm::ResponseCache>(s.cache));
  }
  if (s.live.base_url.empty()) throw ConfigError("llm.base_url", "required for the live provider");
  if (s.live.model.empty()) throw ConfigError("llm.model", "required for the live provider");
  if (s.cache.empty()) throw ConfigError("llm.cache", "required for the live provider");
  return std::make_shared<llm::LiveProvider>(s.live, std::make_shared<llm::ResponseCache>(s.cache));
}

std::unique_ptr<llm::Gateway> make_gateway(const PipelineConfig& config) {
  return std::make_unique<llm::Gateway>(make_provider(config), config.llm.gateway);
}

std::vector<YearMonth> test_months(const CorpusManifest& manifest, YearMonth training_month) {
  std::vector<YearMonth> out;
  for (auto m : manifest.months()) {
    if (m > training_month && !is_out_of_range(m)) out.push_back(m);
  }
  return out;
}

IngestResult run_ingest(const PipelineConfig& config) {
  require_path(config.corpus.raw_dir, "corpus.raw_dir");
  require_path(config.corpus.labels, "corpus.labels");
  if (config.corpus.root.empty()) throw ConfigError("corpus.root", "required for this command but not set");
  IngestOptions options;
  options.allowed_sandboxes = config.corpus.allowed_sandboxes;
  options.excluded_sources = config.corpus.excluded_sources;
  auto result = ingest(config.corpus.raw_dir, config.corpus.labels, config.corpus.root, options);
  write_json(config.run.dir / "ingest_stats.json", result.stats.to_json());
  return result;
}

rules::GenerationResult run_generate(const PipelineConfig& config, llm::Gateway& gateway) {
  auto corpus = open_corpus(config);
  auto result = rules::generate_rules(corpus, config.rules.training_month, gateway, config.run.workers);
  fs::create_directories(config.run.dir);
  rules::save_rules(config.rule_store(), result.rules);
  std::vector<json> log;
  for (const auto& e : result.log) {
    json j = {{"origin", e.origin}, {"rules", e.rule_count}};
    j["error"] = e.error_kind ? json(to_string(*e.error_kind)) : json(nullptr);
    log.push_back(std::move(j));
  }
  write_jsonl(config.run.dir / "generation_log.jsonl", log);
  return result;
}

rules::ValidationReport run_validate(const PipelineConfig& config) {
  auto corpus = open_corpus(config);
  require_path(config.rule_store(), "rules.store");
  auto store = rules::load_rules(config.rule_store());
  auto set = rules::ValidationSet::from_corpus(corpus, config.rules.training_month,
                                               config.validation.error_rate_all_labels);
  auto report = rules::validate_all(std::move(store), set, config.validation.options, config.run.workers,
                                    config.run.dir / "validation_checkpoint.jsonl");
  rules::save_rules(config.rule_store(), report.rules);
  write_json(config.run.dir / "validation_summary.json", report.summary());
  return report;
}

clustering::ClusterSet run_cluster(const PipelineConfig& config) {
  require_path(config.rule_store(), "rules.store");
  auto store = rules::load_rules(config.rule_store());
  auto clusters = clustering::build_clusters(store, config.rules.hdbscan);
  for (auto& r : store) {
    auto it = clusters.cluster_of_rule.find(r.id);
    r.cluster_id = it == clusters.cluster_of_rule.end() ? std::nullopt : std::optional<int>(it->second);
  }
  rules::save_rules(config.rule_store(), store);
  clusters.save(config.cluster_file());
  return clusters;
}

json ClassifySummary::to_json() const {
  return {{"samples", samples},   {"malicious", malicious},     {"benign", benign},
          {"uncertain", uncertain}, {"llm_queries", llm_queries}, {"unscored", unscored}};
}

ClassifySummary run_classify(const PipelineConfig& config, llm::Gateway& gateway) {
  auto corpus = open_corpus(config);
  auto engine = load_engine(config);
  auto entries = test_entries(corpus.manifest(), config.rules.training_month);

  std::vector<json> records(entries.size());
  parallel_for(entries.size(), config.run.workers, [&](std::size_t i) {
    auto report = corpus.load(*entries[i]);
    auto rv = decision::classify_rules(report, engine, config.decision.tau, config.classify.per_rule_budget);
    json rec = base_record(*entries[i]);
    rec["rules"] = rules_json(rv);
    rec["deferred"] = rv.verdict == decision::RulesLabel::uncertain;
    rec["llm"] = nullptr;
    Prediction p = rv.verdict == decision::RulesLabel::malicious ? Prediction::malicious : Prediction::benign;
    if (rv.verdict == decision::RulesLabel::uncertain) {
      try {
        auto r = gateway.request_verdict(report);
        rec["llm"] = llm_json(r);
        p = prediction_of(r);
      } catch (const ProviderError& e) {
        rec["unscored"] = e.what();
        p = Prediction::error;
      }
    }
    rec["prediction"] = to_string(p);
    records[i] = std::move(rec);
  });

  ClassifySummary s;
  for (const auto& r : records) {
    ++s.samples;
    auto v = r["rules"]["verdict"].get<std::string>();
    if (v == "malicious") ++s.malicious;
    if (v == "benign") ++s.benign;
    if (v == "uncertain") ++s.uncertain;
    if (r["deferred"].get<bool>()) ++s.llm_queries;
    if (r.contains("unscored")) ++s.unscored;
  }
  write_jsonl(config.run.dir / "rules_verdicts.jsonl", records);
  write_json(config.run.dir / "classify_summary.json", s.to_json());
  return s;
}

json TridentSummary::to_json() const {
  return {{"samples", samples}, {"malicious", malicious}, {"llm_queries", llm_queries},
          {"unscored", unscored}, {"paths", paths}};
}

TridentSummary run_trident(const PipelineConfig& config, llm::Gateway& gateway) {
  if (config.gbdt.scores.empty()) throw ConfigError("gbdt.scores", "required for trident but not set");
  require_path(config.gbdt.scores, "gbdt.scores");
  config.decision.validate();
  auto scores = decision::load_gbdt_scores(config.gbdt.scores);
  auto corpus = open_corpus(config);
  auto engine = load_engine(config);
  auto entries = test_entries(corpus.manifest(), config.rules.training_month);

  std::vector<json> records(entries.size());
  parallel_for(entries.size(), config.run.workers, [&](std::size_t i) {
    const auto& entry = *entries[i];
    json rec = base_record(entry);
    auto score = scores.find(entry.sample_id);
    if (score == scores.end()) {
      rec["unscored"] = "no gbdt score";
      records[i] = std::move(rec);
      return;
    }
    auto report = corpus.load(entry);
    auto rv = decision::classify_rules(report, engine, config.decision.tau, config.classify.per_rule_budget);
    try {
      auto v = decision::trident_classify(report, rv, score->second, gateway, config.decision);
      rec["rules"] = rules_json(v.rules);
      rec["gbdt"] = {{"probability", v.gbdt_probability}, {"verdict", to_string(v.gbdt)}};
      rec["llm_queried"] = v.llm_queried;
      rec["llm"] = v.llm ? llm_json(*v.llm) : json(nullptr);
      rec["llm_vote"] = v.llm_vote ? json(to_string(*v.llm_vote)) : json(nullptr);
      rec["final"] = to_string(v.final);
      rec["path"] = to_string(v.path);
      rec["evidence"] = v.evidence;
    } catch (const ProviderError& e) {
      rec["unscored"] = e.what();
    }
    records[i] = std::move(rec);
  });

  TridentSummary s;
  for (const auto& r : records) {
    ++s.samples;
    if (r.contains("unscored")) {
      ++s.unscored;
      continue;
    }
    if (r["final"] == "malicious") ++s.malicious;
    if (r["llm_queried"].get<bool>()) ++s.llm_queries;
    ++s.paths[r["path"].get<std::string>()];
  }
  write_jsonl(config.run.dir / "trident_verdicts.jsonl", records);
  write_json(config.run.dir / "trident_summary.json", s.to_json());
  return s;
}

std::vector<evaluation::ScoredSample> load_predictions(const PipelineConfig& config,
                                                       const CorpusManifest& manifest,
                                                       const std::string& method) {
  auto entries = test_entries(manifest, config.rules.training_month);
  std::map<std::string, Prediction> predicted;

  if (method == "rules" || method == "trident") {
    auto path = config.run.dir / (method + "_verdicts.jsonl");
    if (!fs::exists(path)) {
      throw DataError(path.string() + " not found; run the " +
                      (method == "rules" ? "classify" : "trident") + " command first");
    }
    for (const auto& r : read_jsonl(path)) {
      auto id = r.at("sample_id").get<std::string>();
      Prediction p = Prediction::error;
      if (method == "rules" && r.contains("prediction")) {
        p = evaluation::parse_prediction(r["prediction"].get<std::string>());
      } else if (method == "trident" && r.contains("final")) {
        p = evaluation::parse_prediction(r["final"].get<std::string>());
      }
      if (!predicted.emplace(id, p).second) throw DataError(path.string() + ": duplicate sample " + id);
    }
  } else if (method == "gbdt" || method == "gbdt_alt") {
    const auto& file = method == "gbdt" ? config.gbdt.scores : config.gbdt.alt_scores;
    require_path(file, method == "gbdt" ? "gbdt.scores" : "gbdt.alt_scores");
    for (const auto& [id, p] : decision::load_gbdt_scores(file)) {
      predicted[id] = decision::gbdt_verdict(p, config.decision) == decision::Binary::malicious
                          ? Prediction::malicious
                          : Prediction::benign;
    }
  } else {
    throw ConfigError("evaluation.methods", "unknown method '" + method + "'");
  }

  std::vector<evaluation::ScoredSample> out;
  for (const auto* e : entries) {
    evaluation::ScoredSample s;
    s.sample_id = e->sample_id;
    s.month = e->month;
    s.label = e->label;
    s.family = e->family;
    s.sandbox = e->sandbox;
    s.size_bytes = e->size_bytes;
    auto it = predicted.find(e->sample_id);
    s.prediction = it == predicted.end() ? Prediction::error : it->second;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<evaluation::MethodResult> run_evaluate(const PipelineConfig& config) {
  auto corpus = open_corpus(config);
  const auto& manifest = corpus.manifest();
  std::vector<evaluation::MethodResult> results;
  std::set<std::string> done;
  for (const auto& method : config.evaluation.methods) {
    if (!done.insert(method).second) continue;
    auto samples = load_predictions(config, manifest, method);
    evaluation::MethodResult r;
    r.method = method;
    r.months = evaluation::monthly_metrics(samples, manifest, config.rules.training_month,
                                           config.evaluation.error_mode);
    r.total = evaluation::confusion(samples);
    r.sizes = evaluation::size_analysis(samples);
    results.push_back(std::move(r));
  }
  evaluation::write_reports(config.run.dir / "evaluation", results, config.evaluation.error_mode,
                            config.evaluation.pooled);
  return results;
}

}  // namespace trident::pipeline
