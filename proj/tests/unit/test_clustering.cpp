#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <cmath>

#include "support/fixtures.hpp"
#include "trident/rule_clustering.hpp"

namespace trident::clustering {
namespace {

using testing::planted_names;
using testing::singleton_noise;

rules::DetectionRule good_rule(std::string id, std::string name) {
  rules::DetectionRule r;
  r.id = std::move(id);
  r.name = std::move(name);
  r.status = rules::RuleStatus::good;
  return r;
}

// Normalized, deduplicated names with their planted labels, as build_clusters
// would see them.
testing::PlantedNames normalized(const testing::PlantedNames& planted) {
  testing::PlantedNames out;
  for (std::size_t i = 0; i < planted.names.size(); ++i) {
    auto n = normalize_name(planted.names[i]);
    if (std::find(out.names.begin(), out.names.end(), n) != out.names.end()) continue;
    out.names.push_back(n);
    out.truth.push_back(planted.truth[i]);
  }
  return out;
}

TEST(Names, Normalization) {
  EXPECT_EQ(normalize_name("rule_c2_known_ip"), "c2_known_ip");
  EXPECT_EQ(normalize_name("Rule_Shadow_Copy"), "shadow_copy");
  EXPECT_EQ(normalize_name("rule_rule_x"), "rule_x");
  EXPECT_EQ(normalize_name("plain"), "plain");
  bool fallback = false;
  EXPECT_EQ(normalize_name("rule_", &fallback), "rule_");
  EXPECT_TRUE(fallback);
  fallback = false;
  normalize_name("rule_a", &fallback);
  EXPECT_FALSE(fallback);
}

TEST(Names, Tokenize) {
  EXPECT_EQ(tokenize_name("c2_known_ip"), (std::vector<std::string>{"c", "2", "known", "ip"}));
  EXPECT_EQ(tokenize_name("drop-temp.exe"), (std::vector<std::string>{"drop", "temp", "exe"}));
}

TEST(Vectorize, UnitNormAndIdentity) {
  auto v = vectorize({"drop_temp_exe", "drop_temp_exe_1", "beacon_dns"});
  for (const auto& nv : v) EXPECT_NEAR(nv.features.norm(), 1.0, 1e-12);
  EXPECT_NEAR(cosine_distance(v[0].features, v[0].features), 0.0, 1e-12);
  EXPECT_LT(cosine_distance(v[0].features, v[1].features), cosine_distance(v[0].features, v[2].features));
  EXPECT_NEAR(cosine_distance(v[0].features, v[1].features), cosine_distance(v[1].features, v[0].features),
              1e-15);
}

TEST(Hdbscan, MatchesReferenceFixtures) {
  auto cases = testing::read_json(testing::fixture_dir() / "cluster_cases.json");
  ASSERT_GE(cases.size(), 10u);
  for (std::size_t c = 0; c < cases.size(); ++c) {
    SCOPED_TRACE("case " + std::to_string(c));
    auto names = cases[c]["names"].get<std::vector<std::string>>();
    auto expected = cases[c]["labels"].get<std::vector<int>>();
    auto labels = hdbscan(vectorize(names), {3, 1});
    ASSERT_EQ(labels.size(), expected.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      EXPECT_EQ(labels[i] == -1, expected[i] == -1) << names[i];
    }
    EXPECT_DOUBLE_EQ(adjusted_rand_index(singleton_noise(labels), singleton_noise(expected)), 1.0);
  }
}

TEST(Hdbscan, RecoversPlantedGroups) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto planted = normalized(planted_names(seed));
    auto labels = hdbscan(vectorize(planted.names));
    double ari = adjusted_rand_index(singleton_noise(labels), singleton_noise(planted.truth));
    EXPECT_GE(ari, 0.9) << "seed " << seed;
  }
}

TEST(Hdbscan, DegenerateInputs) {
  EXPECT_TRUE(hdbscan(vectorize({})).empty());
  EXPECT_EQ(hdbscan(vectorize({"a_b"})), std::vector<int>{-1});
  EXPECT_EQ(hdbscan(vectorize({"a_b", "c_d"})), (std::vector<int>{-1, -1}));
  // Identical points at distance zero form one cluster.
  auto zero = [](std::size_t, std::size_t) { return 0.0; };
  auto same = hdbscan(5, zero);
  for (int l : same) EXPECT_EQ(l, same[0]);
}

TEST(Hdbscan, ClusterIdsFollowSmallestMember) {
  auto planted = normalized(planted_names(3));
  auto labels = hdbscan(vectorize(planted.names));
  int next = 0;
  for (int l : labels) {
    if (l < 0) continue;
    EXPECT_LE(l, next);
    if (l == next) ++next;
  }
}

TEST(Ari, KnownValues) {
  EXPECT_DOUBLE_EQ(adjusted_rand_index({0, 0, 1, 1}, {5, 5, 7, 7}), 1.0);
  // sklearn.metrics.adjusted_rand_score([0,0,1,1],[0,1,0,1]) == -0.5
  EXPECT_NEAR(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}), -0.5, 1e-12);
  // adjusted_rand_score([0,0,0,1,1,1],[0,0,1,1,2,2]) == 0.24242424...
  EXPECT_NEAR(adjusted_rand_index({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}), 8.0 / 33.0, 1e-12);
}

TEST(BuildClusters, SameNameRulesShareACluster) {
  std::vector<rules::DetectionRule> rules;
  auto planted = planted_names(7);
  for (std::size_t i = 0; i < planted.names.size(); ++i) {
    rules.push_back(good_rule("s" + std::to_string(i) + "#0", planted.names[i]));
    std::string upper = planted.names[i];
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
    rules.push_back(good_rule("s" + std::to_string(i) + "#1", upper));
  }
  auto rejected = good_rule("x#0", "rule_unrelated_thing");
  rejected.status = rules::RuleStatus::rejected;
  rules.push_back(rejected);

  auto set = build_clusters(rules);
  EXPECT_EQ(set.cluster_of_rule.count("x#0"), 0u);
  for (std::size_t i = 0; i < planted.names.size(); ++i) {
    auto a = set.cluster_of_rule.at("s" + std::to_string(i) + "#0");
    auto b = set.cluster_of_rule.at("s" + std::to_string(i) + "#1");
    EXPECT_EQ(a, b) << planted.names[i];
  }
  std::size_t members = 0;
  std::size_t singletons = 0;
  for (const auto& c : set.clusters) {
    members += c.size();
    singletons += c.singleton;
    if (c.singleton) {
      EXPECT_EQ(c.names.size(), 1u);
    }
  }
  EXPECT_EQ(members, rules.size() - 1);
  EXPECT_EQ(set.stats.singletons, singletons);
  EXPECT_EQ(set.stats.clusters + set.stats.singletons, set.clusters.size());
}

TEST(BuildClusters, SaveLoadRoundTrip) {
  std::vector<rules::DetectionRule> rules;
  auto planted = planted_names(2);
  for (std::size_t i = 0; i < planted.names.size(); ++i) {
    rules.push_back(good_rule("r" + std::to_string(i) + "#0", planted.names[i]));
  }
  auto set = build_clusters(rules);
  testing::TempDir tmp("clusters");
  set.save(tmp.path() / "clusters.json");
  auto back = ClusterSet::load(tmp.path() / "clusters.json");
  EXPECT_EQ(back.to_json(), set.to_json());
  EXPECT_EQ(back.cluster_of_rule, set.cluster_of_rule);
}

TEST(BuildClusters, EmptyInput) {
  auto set = build_clusters({});
  EXPECT_TRUE(set.clusters.empty());
  EXPECT_EQ(set.stats.clusters, 0u);
}

}  // namespace
}  // namespace trident::clustering
