#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support/fixtures.hpp"
#include "trident/decision.hpp"
#include "trident/errors.hpp"

namespace trident::decision {
namespace {

using testing::decision_oracle;

RulesVerdict rules_of(RulesLabel label) {
  RulesVerdict v;
  v.verdict = label;
  if (label != RulesLabel::benign) {
    v.cluster_hits = label == RulesLabel::malicious ? 7 : 2;
    v.matched_rules = {"a#0"};
  }
  return v;
}

llm::VerdictResponse llm_reply(llm::Verdict verdict) {
  llm::VerdictResponse r;
  r.verdict = verdict;
  if (verdict == llm::Verdict::error) {
    r.error_kind = llm::ErrorKind::refusal;
  } else {
    r.explanation = "because";
  }
  return r;
}

struct Outcome {
  TridentVerdict verdict;
  int calls = 0;
};

Outcome run(RulesLabel rules, llm::Verdict llm, double p, const CombinerConfig& config = {}) {
  Outcome o;
  o.verdict = combine(rules_of(rules), p, [&] {
    ++o.calls;
    return llm_reply(llm);
  }, config);
  return o;
}

TEST(RulesVerdict, ThresholdOnClusterHits) {
  RuleHits none;
  EXPECT_EQ(rules_verdict(none, 6).verdict, RulesLabel::benign);
  RuleHits hits;
  for (int c = 0; c < 7; ++c) hits.matched_clusters.insert(c);
  hits.matched_rules = {"x#0"};
  EXPECT_EQ(rules_verdict(hits, 6).verdict, RulesLabel::malicious);
  EXPECT_EQ(rules_verdict(hits, 7).verdict, RulesLabel::uncertain);
  EXPECT_EQ(rules_verdict(hits, 0).verdict, RulesLabel::malicious);
  EXPECT_EQ(rules_verdict(hits, 6).cluster_hits, 7u);
}

TEST(RulesVerdict, LargerTauNeverAddsMalicious) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    RuleHits h;
    int clusters = static_cast<int>(rng() % 12);
    for (int c = 0; c < clusters; ++c) h.matched_clusters.insert(static_cast<int>(rng() % 20));
    if (!h.matched_clusters.empty()) h.matched_rules = {"r#0"};
    for (std::size_t tau = 0; tau < 10; ++tau) {
      if (rules_verdict(h, tau + 1).verdict == RulesLabel::malicious) {
        EXPECT_EQ(rules_verdict(h, tau).verdict, RulesLabel::malicious);
      }
    }
  }
}

TEST(Combine, FullGridAgainstOracle) {
  const double grid[] = {0.0, 0.3, 0.5, 0.7, 0.983, 0.99, 1.0};
  for (auto rules : {RulesLabel::benign, RulesLabel::malicious, RulesLabel::uncertain}) {
    for (auto llm : {llm::Verdict::benign, llm::Verdict::malicious, llm::Verdict::error}) {
      for (double p : grid) {
        auto expected = decision_oracle(rules, llm, p);
        auto got = run(rules, llm, p);
        SCOPED_TRACE(std::string(to_string(rules)) + " " + std::string(llm::to_string(llm)) + " " +
                     std::to_string(p));
        EXPECT_EQ(got.verdict.final, expected.final);
        EXPECT_EQ(got.verdict.llm_queried, expected.queried);
        EXPECT_EQ(got.calls, expected.queried ? 1 : 0);
      }
    }
  }
}

TEST(Combine, RandomAgainstOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const RulesLabel rl[] = {RulesLabel::benign, RulesLabel::malicious, RulesLabel::uncertain};
  const llm::Verdict lv[] = {llm::Verdict::benign, llm::Verdict::malicious, llm::Verdict::error};
  for (int i = 0; i < 5000; ++i) {
    auto rules = rl[rng() % 3];
    auto llm = lv[rng() % 3];
    double p = unit(rng);
    auto expected = decision_oracle(rules, llm, p);
    auto got = run(rules, llm, p);
    ASSERT_EQ(got.verdict.final, expected.final) << p;
    ASSERT_EQ(got.calls, expected.queried ? 1 : 0);
  }
}

TEST(Combine, WorkedCases) {
  // Rules benign, LLM malicious, GBDT 0.995: tiebreak sides with malicious.
  auto a = run(RulesLabel::uncertain, llm::Verdict::benign, 0.995);
  EXPECT_EQ(a.verdict.final, Binary::malicious);
  EXPECT_EQ(a.verdict.path, Path::tiebreak);
  auto b = run(RulesLabel::uncertain, llm::Verdict::malicious, 0.60);
  EXPECT_EQ(b.verdict.final, Binary::malicious);
  EXPECT_EQ(b.verdict.path, Path::tiebreak);
  auto c = run(RulesLabel::uncertain, llm::Verdict::benign, 0.985);
  EXPECT_EQ(c.verdict.final, Binary::benign);
  EXPECT_EQ(c.verdict.gbdt, Binary::malicious);
}

TEST(Combine, BoundaryIsInclusive) {
  CombinerConfig config;
  EXPECT_EQ(gbdt_verdict(0.983, config), Binary::malicious);
  EXPECT_EQ(gbdt_verdict(0.98299999, config), Binary::benign);
  EXPECT_EQ(tiebreak(Binary::benign, 0.99), Binary::malicious);
  EXPECT_EQ(tiebreak(Binary::malicious, 0.5), Binary::malicious);
  EXPECT_EQ(tiebreak(Binary::malicious, 0.4999), Binary::benign);
}

TEST(Combine, TiebreakIsMonotoneInProbability) {
  for (auto llm : {Binary::benign, Binary::malicious}) {
    bool seen_malicious = false;
    for (int i = 0; i <= 1000; ++i) {
      bool mal = tiebreak(llm, i / 1000.0) == Binary::malicious;
      if (seen_malicious) {
        EXPECT_TRUE(mal) << i;
      }
      seen_malicious = seen_malicious || mal;
    }
  }
}

TEST(Combine, EvidenceRecordsEveryVoter) {
  auto o = run(RulesLabel::malicious, llm::Verdict::benign, 0.1);
  EXPECT_EQ(o.verdict.path, Path::llm_majority);
  EXPECT_EQ(o.verdict.final, Binary::benign);
  const auto& e = o.verdict.evidence;
  EXPECT_DOUBLE_EQ(e.at("gbdt_probability").get<double>(), 0.1);
  EXPECT_EQ(e.at("matched_rules"), json::array({"a#0"}));
  EXPECT_EQ(e.at("llm_explanation"), "because");

  auto err = run(RulesLabel::uncertain, llm::Verdict::error, 0.1);
  EXPECT_EQ(err.verdict.evidence.at("llm_error"), "refusal");
  EXPECT_EQ(err.verdict.llm_vote, Binary::malicious);
}

TEST(Combine, ErrorPolicies) {
  CombinerConfig config;
  config.llm_error_policy = LlmErrorPolicy::benign;
  auto b = run(RulesLabel::malicious, llm::Verdict::error, 0.1, config);
  EXPECT_EQ(b.verdict.final, Binary::benign);
  EXPECT_EQ(b.verdict.path, Path::llm_majority);

  config.llm_error_policy = LlmErrorPolicy::abstain;
  auto a = run(RulesLabel::malicious, llm::Verdict::error, 0.1, config);
  EXPECT_EQ(a.verdict.final, Binary::benign);
  EXPECT_EQ(a.verdict.path, Path::gbdt_fallback);
  EXPECT_FALSE(a.verdict.llm_vote);
  auto u = run(RulesLabel::uncertain, llm::Verdict::error, 0.99, config);
  EXPECT_EQ(u.verdict.final, Binary::malicious);
  EXPECT_EQ(u.verdict.path, Path::gbdt_fallback);

  EXPECT_EQ(parse_error_policy("abstain"), LlmErrorPolicy::abstain);
  EXPECT_THROW(parse_error_policy("maybe"), ConfigError);
}

TEST(Combine, ConfigValidation) {
  CombinerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.boundary = 1.0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "decision.boundary");
  }
  c = {};
  c.tiebreak_low = 0.995;
  EXPECT_THROW(c.validate(), ConfigError);
}

class EngineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto add = [&](std::string id, std::string name, std::string body, int cluster) {
      rules::DetectionRule r;
      r.id = id;
      r.name = name;
      r.status = rules::RuleStatus::good;
      r.source = "def " + name + ": " + body + ";";
      rules_.push_back(r);
      clustering::RuleCluster* c = nullptr;
      for (auto& existing : clusters_.clusters) {
        if (existing.id == cluster) c = &existing;
      }
      if (!c) {
        clusters_.clusters.push_back({});
        c = &clusters_.clusters.back();
        c->id = cluster;
      }
      c->names.insert(name);
      c->rule_ids.insert(id);
      clusters_.cluster_of_rule[id] = cluster;
    };
    add("o#0", "rule_exe", R"([.data[]?.attributes?.files[]? | select(endswith(".exe"))])", 0);
    add("o#1", "rule_exe_2", R"([.data[]?.attributes?.files[]? | select(test("\\.exe$"))])", 0);
    add("o#2", "rule_dns", R"([.data[]?.attributes?.dns[]? | select(. == "c2.example")])", 1);
    add("o#3", "rule_strict", R"([.data[0].attributes.marker[] | select(. == "x")])", 2);
  }

  std::vector<rules::DetectionRule> rules_;
  clustering::ClusterSet clusters_;
};

TEST_F(EngineTest, CountsClustersNotRules) {
  RuleEngine engine(rules_, clusters_);
  EXPECT_EQ(engine.rule_count(), 4u);
  auto r = testing::make_report("s", Label::unknown,
                                {{"files", json::array({"a.exe"})}, {"dns", json::array({"c2.example"})}});
  auto hits = engine.evaluate(r.document, std::chrono::seconds(1));
  EXPECT_EQ(hits.matched_clusters, (std::set<int>{0, 1}));
  EXPECT_EQ(hits.matched_rules.size(), 3u);
  EXPECT_EQ(hits.error_count, 1u);
  auto v = classify_rules(r, engine, 1);
  EXPECT_EQ(v.verdict, RulesLabel::malicious);
  EXPECT_EQ(classify_rules(r, engine, 2).verdict, RulesLabel::uncertain);
  auto clean = testing::make_report("c", Label::unknown, {{"files", json::array({"a.dll"})}});
  EXPECT_EQ(classify_rules(clean, engine, 6).verdict, RulesLabel::benign);
}

TEST_F(EngineTest, RejectsUnclusteredOrBrokenRules) {
  auto clusters = clusters_;
  clusters.cluster_of_rule.erase("o#2");
  EXPECT_THROW(RuleEngine(rules_, clusters), DataError);
  auto broken = rules_;
  broken[0].source = "def x: [limit(1; .a)];";
  EXPECT_THROW(RuleEngine(broken, clusters_), DataError);
  auto rejected = rules_;
  rejected[0].status = rules::RuleStatus::rejected;
  rejected[0].source = "not a rule";
  EXPECT_EQ(RuleEngine(rejected, clusters_).rule_count(), 3u);
}

TEST(GbdtScores, LoadAndReject) {
  testing::TempDir tmp("scores");
  auto write = [&](const std::string& text) {
    std::ofstream(tmp.path() / "s.csv") << text;
    return tmp.path() / "s.csv";
  };
  auto scores = load_gbdt_scores(write("sample_id,probability\na,0.5\nb,1\n"));
  EXPECT_EQ(scores.size(), 2u);
  EXPECT_DOUBLE_EQ(scores.at("a"), 0.5);
  EXPECT_THROW(load_gbdt_scores(write("id,p\na,0.5\n")), DataError);
  EXPECT_THROW(load_gbdt_scores(write("sample_id,probability\na,x\n")), DataError);
  EXPECT_THROW(load_gbdt_scores(write("sample_id,probability\na,1.5\n")), DataError);
  EXPECT_THROW(load_gbdt_scores(write("sample_id,probability\na,0.1\na,0.2\n")), DataError);
}

}  // namespace
}  // namespace trident::decision
