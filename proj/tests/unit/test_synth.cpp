#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "trident/filter.hpp"
#include "trident/pipeline.hpp"
#include "trident/rule_pipeline.hpp"
#include "trident/synth_corpus.hpp"

namespace trident::synth {
namespace {

using testing::TempDir;

std::map<std::string, std::string> tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[std::filesystem::relative(e.path(), root).string()] = testing::read_text(e.path());
    }
  }
  return files;
}

bool has_banned_key(const json& j) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (testing::is_banned_key(k) || has_banned_key(v)) return true;
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (has_banned_key(v)) return true;
    }
  }
  return false;
}

SynthOptions small() {
  SynthOptions o;
  o.seed = 7;
  o.months = 2;
  o.malware_per_month = 50;
  o.benign_per_month = 50;
  return o;
}

TEST(Rng, FixedSequence) {
  Rng a(1), b(1);
  for (int i = 0; i < 100; ++i) {
    auto x = a.uniform_int(3, 9);
    EXPECT_EQ(x, b.uniform_int(3, 9));
    EXPECT_GE(x, 3);
    EXPECT_LE(x, 9);
    double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Synth, SameSeedSameBytes) {
  TempDir a("synth-a"), b("synth-b");
  auto sa = generate(small(), a.path());
  auto sb = generate(small(), b.path());
  EXPECT_EQ(sa.to_json(), sb.to_json());
  auto ta = tree(a.path());
  auto tb = tree(b.path());
  EXPECT_EQ(ta.size(), tb.size());
  EXPECT_TRUE(ta == tb);
  EXPECT_EQ(sa.labeled_reports, 200u);
  EXPECT_EQ(sa.malware + sa.benign, 200u);
  EXPECT_GT(sa.cache_entries, 0u);

  auto other = small();
  other.seed = 8;
  TempDir c("synth-c");
  generate(other, c.path());
  EXPECT_FALSE(tree(c.path()) == ta);
}

TEST(Synth, DocumentsAreDeterministicAndClean) {
  auto d1 = make_document(5, {"c2_known_ip", "shadow_copy_deletion"}, true);
  auto d2 = make_document(5, {"c2_known_ip", "shadow_copy_deletion"}, true);
  EXPECT_EQ(d1, d2);
  EXPECT_FALSE(has_banned_key(d1));
}

TEST(Synth, ReferenceRulesPassValidation) {
  TempDir tmp("synth-ref");
  auto summary = generate(small(), tmp.path());
  ingest(tmp.path() / "raw", tmp.path() / "labels.csv", tmp.path() / "corpus");
  Corpus corpus(tmp.path() / "corpus");
  for (const auto& r : corpus.load_all()) ASSERT_FALSE(has_banned_key(r.document)) << r.sample_id;

  auto rules = rules::load_rules(tmp.path() / "reference_rules.jsonl");
  ASSERT_EQ(rules.size(), summary.reference_rules);
  ASSERT_GT(rules.size(), 0u);
  auto set = rules::ValidationSet::from_corpus(corpus, small().start);
  for (const auto& rule : rules) {
    auto v = rules::validate_rule(rule, set);
    EXPECT_EQ(v.status, rules::RuleStatus::good) << rule.name << " " << v.reason_text() << " " << v.note;
  }
}

TEST(Synth, PlantedBadRulesFailValidation) {
  TempDir tmp("synth-bad");
  generate(small(), tmp.path());
  ingest(tmp.path() / "raw", tmp.path() / "labels.csv", tmp.path() / "corpus");
  Corpus corpus(tmp.path() / "corpus");
  auto set = rules::ValidationSet::from_corpus(corpus, small().start);
  auto proxy_origin = std::find_if(set.reports().begin(), set.reports().end(), [](const BehaviorReport& r) {
    return r.label == Label::malicious &&
           filter::rule_matches(filter::evaluate(filter::parse_filter(proxy_rule_source()), r.document)) ==
               filter::MatchResult::match;
  });
  ASSERT_NE(proxy_origin, set.reports().end());
  rules::DetectionRule proxy;
  proxy.id = proxy_origin->sample_id + "#0";
  proxy.origin = proxy_origin->sample_id;
  proxy.source = proxy_rule_source();
  EXPECT_EQ(rules::validate_rule(proxy, set).reason, rules::RejectReason::false_positive);

  rules::DetectionRule limit = proxy;
  limit.source = unsupported_rule_source();
  EXPECT_EQ(rules::validate_rule(limit, set).reason, rules::RejectReason::compile_error);
}

TEST(Synth, BenignOnlyCorpusHasNoRuleMatches) {
  TempDir ref("synth-ref2");
  generate(small(), ref.path());
  auto rules = rules::load_rules(ref.path() / "reference_rules.jsonl");

  TempDir tmp("synth-benign");
  auto opts = small();
  opts.seed = 99;
  opts.malware_per_month = 0;
  opts.include_ingest_noise = false;
  auto summary = generate(opts, tmp.path());
  EXPECT_EQ(summary.malware, 0u);
  ingest(tmp.path() / "raw", tmp.path() / "labels.csv", tmp.path() / "corpus");
  Corpus corpus(tmp.path() / "corpus");
  auto reports = corpus.load_all();
  ASSERT_EQ(reports.size(), 100u);
  for (const auto& rule : rules) {
    auto ast = filter::parse_filter(rule.source);
    for (const auto& r : reports) {
      EXPECT_NE(filter::rule_matches(filter::evaluate(ast, r.document)), filter::MatchResult::match)
          << rule.name << " on " << r.sample_id;
    }
  }
}

}  // namespace
}  // namespace trident::synth
