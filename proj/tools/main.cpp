// trident: command line entry point for the detection pipeline.

#include <deque>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "trident/config.hpp"
#include "trident/errors.hpp"
#include "trident/pipeline.hpp"
#include "trident/synth_corpus.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct Common {
  std::optional<std::string> config_file;
  std::vector<std::string> sets;
  std::optional<std::string> run_dir;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "INI configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a setting, e.g. --set decision.tau=4");
  cmd->add_option("--run-dir", c.run_dir, "Directory for outputs and the effective config");
  cmd->add_option("-j,--workers", c.workers, "Worker pool size");
}

// Flag values recorded as "section.key" overrides; applied after --set.
struct FlagMap {
  std::deque<std::pair<std::string, std::optional<std::string>>> values;

  // Values stay text here; PipelineConfig parses them and names the key on error.
  void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    values.emplace_back(key, std::nullopt);
    auto& slot = values.back().second;
    cmd->add_option_function<std::string>(flag, [&slot](const std::string& v) { slot = v; }, help);
  }
};

Overrides collect(const Common& c, const FlagMap& flags) {
  Overrides out;
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw trident::ConfigError(s, "--set expects key=value");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.run_dir) out.emplace_back("run.dir", *c.run_dir);
  if (c.workers) out.emplace_back("run.workers", std::to_string(*c.workers));
  for (const auto& [key, value] : flags.values) {
    if (value) out.emplace_back(key, *value);
  }
  return out;
}

trident::PipelineConfig prepare(const std::string& command, const Common& c, const FlagMap& flags) {
  std::optional<std::filesystem::path> file;
  if (c.config_file) file = *c.config_file;
  auto config = trident::PipelineConfig::load(file, collect(c, flags));
  config.validate();
  config.save(config.run.dir / (command + ".config.ini"));
  return config;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-report malware detection pipeline"};
  app.require_subcommand(1);

  // The deque keeps FlagMap slots stable while options capture references.
  std::deque<FlagMap> flag_maps;
  std::deque<Common> commons;
  auto command = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, commons.emplace_back());
    flag_maps.emplace_back();
    return std::make_tuple(cmd, &commons.back(), &flag_maps.back());
  };

  trident::synth::SynthOptions synth_opts;
  std::string synth_out;
  bool synth_no_noise = false;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus with a scripted LLM cache");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_opts.seed, "Random seed");
  synth->add_option("--months", synth_opts.months, "Number of monthly buckets");
  synth->add_option("--malware", synth_opts.malware_per_month, "Malware reports per month");
  synth->add_option("--benign", synth_opts.benign_per_month, "Benign reports per month");
  synth->add_option("--llm-error-rate", synth_opts.llm_error_rate, "Fraction of refused verdict replies")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--new-family-share", synth_opts.new_family_share)->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--no-noise", synth_no_noise, "Skip excluded-source and unlabeled reports");

  auto [ingest, ingest_c, ingest_f] = command("ingest", "Sanitize raw reports into a bucketed corpus");
  ingest_f->add(ingest, "--raw", "corpus.raw_dir", "Directory of raw <sample_id>.json reports");
  ingest_f->add(ingest, "--labels", "corpus.labels", "Label sidecar CSV");
  ingest_f->add(ingest, "--corpus", "corpus.root", "Corpus output directory");

  auto [gen, gen_c, gen_f] = command("generate-rules", "Ask the LLM for rules on training-month malware");
  gen_f->add(gen, "--corpus", "corpus.root", "Corpus directory");
  gen_f->add(gen, "--month", "rules.training_month", "Training month YYYY-MM");
  gen_f->add(gen, "--cache", "llm.cache", "LLM response cache (JSONL)");
  gen_f->add(gen, "--provider", "llm.provider", "replay or live");
  gen_f->add(gen, "--rules", "rules.store", "Rule store to write");

  auto [val, val_c, val_f] = command("validate-rules", "Apply the good-rule criteria to the rule store");
  val_f->add(val, "--corpus", "corpus.root", "Corpus directory");
  val_f->add(val, "--rules", "rules.store", "Rule store");
  val_f->add(val, "--budget", "validation.budget", "Per-rule time budget in seconds");
  val_f->add(val, "--max-error-rate", "validation.max_error_rate", "Error fraction that rejects a rule");

  auto [clu, clu_c, clu_f] = command("cluster-rules", "Group good rules by name similarity");
  clu_f->add(clu, "--rules", "rules.store", "Rule store");
  clu_f->add(clu, "--clusters", "rules.clusters", "Cluster file to write");
  clu_f->add(clu, "--min-cluster-size", "rules.min_cluster_size", "HDBSCAN min_cluster_size");

  auto [cls, cls_c, cls_f] = command("classify", "Rules verdicts with LLM deferral for uncertain samples");
  cls_f->add(cls, "--corpus", "corpus.root", "Corpus directory");
  cls_f->add(cls, "--tau", "decision.tau", "Cluster hits above which rules are definitive");
  cls_f->add(cls, "--cache", "llm.cache", "LLM response cache (JSONL)");
  cls_f->add(cls, "--per-rule-budget", "classify.per_rule_budget", "Seconds per rule evaluation");

  auto [tri, tri_c, tri_f] = command("trident", "Majority vote of rules, GBDT and LLM");
  tri_f->add(tri, "--corpus", "corpus.root", "Corpus directory");
  tri_f->add(tri, "--gbdt-scores", "gbdt.scores", "CSV of sample_id, probability");
  tri_f->add(tri, "--cache", "llm.cache", "LLM response cache (JSONL)");
  tri_f->add(tri, "--tau", "decision.tau", "Cluster hits above which rules are definitive");
  tri_f->add(tri, "--llm-error-policy", "decision.llm_error_policy", "malicious, benign or abstain");

  auto [ev, ev_c, ev_f] = command("evaluate", "Per-month metrics and summary tables");
  std::vector<std::string> methods;
  bool pooled = false;
  ev->add_option("--method", methods, "rules, trident, gbdt or gbdt_alt (repeatable)");
  ev->add_flag("--pooled", pooled, "Pool counts over months instead of averaging rates");
  ev_f->add(ev, "--corpus", "corpus.root", "Corpus directory");
  ev_f->add(ev, "--error-mode", "evaluation.error_mode", "separate, as-malicious or as-benign");
  ev_f->add(ev, "--gbdt-scores", "gbdt.scores", "CSV of sample_id, probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      synth_opts.include_ingest_noise = !synth_no_noise;
      print(trident::synth::generate(synth_opts, synth_out).to_json());
      return 0;
    }
    if (ingest->parsed()) {
      auto config = prepare("ingest", *ingest_c, *ingest_f);
      print(trident::pipeline::run_ingest(config).stats.to_json());
      return 0;
    }
    if (gen->parsed()) {
      auto config = prepare("generate-rules", *gen_c, *gen_f);
      auto gateway = trident::pipeline::make_gateway(config);
      auto result = trident::pipeline::run_generate(config, *gateway);
      std::size_t failed = 0;
      for (const auto& e : result.log) failed += e.error_kind ? 1 : 0;
      print({{"samples", result.log.size()}, {"rules", result.rules.size()}, {"failed_samples", failed}});
      return 0;
    }
    if (val->parsed()) {
      auto config = prepare("validate-rules", *val_c, *val_f);
      print(trident::pipeline::run_validate(config).summary());
      return 0;
    }
    if (clu->parsed()) {
      auto config = prepare("cluster-rules", *clu_c, *clu_f);
      print(trident::pipeline::run_cluster(config).stats.to_json());
      return 0;
    }
    if (cls->parsed()) {
      auto config = prepare("classify", *cls_c, *cls_f);
      auto gateway = trident::pipeline::make_gateway(config);
      auto summary = trident::pipeline::run_classify(config, *gateway);
      print(summary.to_json());
      if (summary.unscored) {
        std::cerr << "error: " << summary.unscored << " samples unscored (LLM unavailable)\n";
        return 3;
      }
      return 0;
    }
    if (tri->parsed()) {
      auto config = prepare("trident", *tri_c, *tri_f);
      auto gateway = trident::pipeline::make_gateway(config);
      auto summary = trident::pipeline::run_trident(config, *gateway);
      print(summary.to_json());
      if (summary.unscored) {
        std::cerr << "error: " << summary.unscored << " samples unscored\n";
        return 3;
      }
      return 0;
    }
    if (ev->parsed()) {
      if (!methods.empty()) {
        std::string joined;
        for (const auto& m : methods) joined += (joined.empty() ? "" : ",") + m;
        ev_c->sets.push_back("evaluation.methods=" + joined);
      }
      if (pooled) ev_c->sets.push_back("evaluation.pooled=true");
      auto config = prepare("evaluate", *ev_c, *ev_f);
      auto results = trident::pipeline::run_evaluate(config);
      nlohmann::json out = nlohmann::json::object();
      for (const auto& r : results) {
        auto avg = trident::evaluation::average(r.months, config.evaluation.error_mode, config.evaluation.pooled);
        auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
        out[r.method] = {{"recall", opt(avg.recall)}, {"f1", opt(avg.f1)}, {"fpr", opt(avg.fpr)}};
      }
      print(out);
      return 0;
    }
  } catch (const trident::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const trident::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return 3;
  } catch (const trident::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
