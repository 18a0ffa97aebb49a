#include <algorithm>
#include <fstream>
#include <numeric>

#include "trident/errors.hpp"
#include "trident/rule_clustering.hpp"

namespace trident::clustering {

json ClusterStats::to_json() const {
  return {{"clusters", clusters},       {"singletons", singletons}, {"median_size", median_size},
          {"mean_size", mean_size},     {"max_size", max_size},
          {"empty_name_fallbacks", empty_name_fallbacks}};
}

json ClusterSet::to_json() const {
  json cs = json::object();
  for (const auto& c : clusters) {
    cs[std::to_string(c.id)] = {{"names", c.names},
                                {"rule_ids", c.rule_ids},
                                {"singleton", c.singleton}};
  }
  return {{"clusters", cs}, {"stats", stats.to_json()}};
}

ClusterSet ClusterSet::from_json(const json& j) {
  ClusterSet set;
  try {
    for (const auto& [key, value] : j.at("clusters").items()) {
      RuleCluster c;
      c.id = std::stoi(key);
      c.names = value.at("names").get<std::set<std::string>>();
      c.rule_ids = value.at("rule_ids").get<std::set<std::string>>();
      c.singleton = value.value("singleton", false);
      for (const auto& id : c.rule_ids) set.cluster_of_rule[id] = c.id;
      set.clusters.push_back(std::move(c));
    }
    const auto& s = j.at("stats");
    set.stats.clusters = s.value("clusters", std::size_t{0});
    set.stats.singletons = s.value("singletons", std::size_t{0});
    set.stats.median_size = s.value("median_size", 0.0);
    set.stats.mean_size = s.value("mean_size", 0.0);
    set.stats.max_size = s.value("max_size", std::size_t{0});
    set.stats.empty_name_fallbacks = s.value("empty_name_fallbacks", std::size_t{0});
  } catch (const std::exception& e) {
    throw DataError(std::string("malformed clusters file: ") + e.what());
  }
  std::sort(set.clusters.begin(), set.clusters.end(),
            [](const RuleCluster& a, const RuleCluster& b) { return a.id < b.id; });
  return set;
}

void ClusterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

ClusterSet ClusterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + ": invalid JSON");
  return from_json(j);
}

ClusterSet build_clusters(const std::vector<rules::DetectionRule>& rules,
                          const HdbscanParams& params) {
  ClusterSet set;
  std::map<std::string, std::vector<std::string>> by_name;  // sorted, deduplicated
  for (const auto& r : rules) {
    if (r.status != rules::RuleStatus::good) continue;
    bool fallback = false;
    by_name[normalize_name(r.name, &fallback)].push_back(r.id);
    if (fallback) ++set.stats.empty_name_fallbacks;
  }
  std::vector<std::string> names;
  for (const auto& [name, _] : by_name) names.push_back(name);
  auto labels = hdbscan(vectorize(names), params);

  int cluster_count = 0;
  for (int l : labels) cluster_count = std::max(cluster_count, l + 1);
  set.clusters.resize(static_cast<std::size_t>(cluster_count));
  for (int c = 0; c < cluster_count; ++c) set.clusters[c].id = c;
  for (std::size_t i = 0; i < names.size(); ++i) {
    RuleCluster* target;
    if (labels[i] >= 0) {
      target = &set.clusters[static_cast<std::size_t>(labels[i])];
    } else {
      RuleCluster single;
      single.id = static_cast<int>(set.clusters.size());
      single.singleton = true;
      set.clusters.push_back(std::move(single));
      target = &set.clusters.back();
    }
    target->names.insert(names[i]);
    for (const auto& id : by_name[names[i]]) target->rule_ids.insert(id);
  }
  // Singletons were appended after all real clusters, so ids stay dense.
  std::stable_partition(set.clusters.begin(), set.clusters.end(),
                        [](const RuleCluster& c) { return !c.singleton; });
  for (std::size_t i = 0; i < set.clusters.size(); ++i) {
    set.clusters[i].id = static_cast<int>(i);
    for (const auto& id : set.clusters[i].rule_ids) set.cluster_of_rule[id] = set.clusters[i].id;
  }

  std::vector<std::size_t> sizes;
  for (const auto& c : set.clusters) {
    if (c.singleton) {
      ++set.stats.singletons;
    } else {
      sizes.push_back(c.size());
    }
  }
  set.stats.clusters = sizes.size();
  if (!sizes.empty()) {
    std::sort(sizes.begin(), sizes.end());
    auto m = sizes.size();
    set.stats.median_size = m % 2 ? static_cast<double>(sizes[m / 2])
                                  : (static_cast<double>(sizes[m / 2 - 1]) + sizes[m / 2]) / 2.0;
    set.stats.mean_size =
        static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0})) /
        static_cast<double>(m);
    set.stats.max_size = sizes.back();
  }
  return set;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto pairs = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [_, v] : table) index += pairs(v);
  for (const auto& [_, v] : rows) sum_rows += pairs(v);
  for (const auto& [_, v] : cols) sum_cols += pairs(v);
  double expected = sum_rows * sum_cols / pairs(n);
  double max_index = (sum_rows + sum_cols) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace trident::clustering
