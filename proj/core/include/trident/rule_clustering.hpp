#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trident/rule_pipeline.hpp"

namespace trident::clustering {

using json = nlohmann::json;

/// Strips one leading "rule_" and lowercases. An empty result falls back to
/// the lowercased original and sets *fallback.
std::string normalize_name(std::string_view name, bool* fallback = nullptr);

/// Splits on underscores (and other non-alphanumerics), then at letter/digit
/// transitions: "c2_known_ip" -> {"c", "2", "known", "ip"}.
std::vector<std::string> tokenize_name(std::string_view name);

/// Sorted (feature id, weight) pairs.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  double dot(const SparseVector& other) const;
  double norm() const;
};

struct NameVector {
  std::string name;
  SparseVector features;
};

struct Vocabulary {
  std::vector<std::string> features;  // id -> "c:<chars>" or "t:<tokens>"
  std::vector<double> idf;
};

/// Char 3-5-grams plus token 1-3-grams, tf * (ln((1+N)/(1+df)) + 1), L2
/// normalized. `names` must already be unique.
std::vector<NameVector> vectorize(const std::vector<std::string>& names,
                                  Vocabulary* vocabulary = nullptr);

/// 1 - dot for unit vectors, clamped at 0.
double cosine_distance(const SparseVector& a, const SparseVector& b);

struct HdbscanParams {
  std::size_t min_cluster_size = 3;
  std::size_t min_samples = 1;
};

/// Label per point, -1 for noise. Clusters are numbered by their smallest
/// member index. `distance(i, j)` must be symmetric.
std::vector<int> hdbscan(std::size_t n, const std::function<double(std::size_t, std::size_t)>& distance,
                         const HdbscanParams& params = {});

std::vector<int> hdbscan(const std::vector<NameVector>& vectors, const HdbscanParams& params = {});

struct RuleCluster {
  int id = 0;
  std::set<std::string> names;     // normalized
  std::set<std::string> rule_ids;
  bool singleton = false;          // built from one noise name
  std::size_t size() const { return rule_ids.size(); }
};

struct ClusterStats {
  std::size_t clusters = 0;    // non-singleton
  std::size_t singletons = 0;
  double median_size = 0;      // over non-singleton clusters
  double mean_size = 0;
  std::size_t max_size = 0;
  std::size_t empty_name_fallbacks = 0;
  json to_json() const;
};

struct ClusterSet {
  std::vector<RuleCluster> clusters;
  ClusterStats stats;
  std::map<std::string, int> cluster_of_rule;

  json to_json() const;
  static ClusterSet from_json(const json& j);
  void save(const std::filesystem::path& path) const;
  static ClusterSet load(const std::filesystem::path& path);
};

/// normalize -> dedup names -> vectorize -> hdbscan; every rule (including
/// same-named ones) maps to its name's cluster and noise names become
/// singleton clusters. Only rules with status good are used.
ClusterSet build_clusters(const std::vector<rules::DetectionRule>& rules,
                          const HdbscanParams& params = {});

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace trident::clustering
