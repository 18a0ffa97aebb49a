#include <algorithm>
#include <limits>
#include <numeric>

#include "trident/rule_clustering.hpp"

namespace trident::clustering {

namespace {

struct Edge {
  std::size_t a, b;
  double weight;
};

// Prim's algorithm over the implicit complete graph of mutual reachability
// distances. Ties pick the lowest index.
std::vector<Edge> minimum_spanning_tree(std::size_t n, const std::vector<double>& core,
                                        const std::function<double(std::size_t, std::size_t)>& d) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Edge> edges;
  edges.reserve(n ? n - 1 : 0);
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, kInf);
  std::vector<std::size_t> from(n, 0);
  std::size_t current = 0;
  for (std::size_t step = 1; step < n; ++step) {
    in_tree[current] = true;
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      double w = std::max({d(current, j), core[current], core[j]});
      if (w < best[j]) {
        best[j] = w;
        from[j] = current;
      }
      if (next == n || best[j] < best[next]) next = j;
    }
    edges.push_back({from[next], next, best[next]});
    current = next;
  }
  return edges;
}

struct LinkNode {
  std::size_t left, right;
  double distance;
  std::size_t size;
};

// Single-linkage dendrogram; internal node k has id n + k.
std::vector<LinkNode> single_linkage(std::size_t n, std::vector<Edge> edges) {
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& x, const Edge& y) { return x.weight < y.weight; });
  std::vector<std::size_t> parent(2 * n), size(2 * n, 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<LinkNode> nodes;
  nodes.reserve(edges.size());
  for (const auto& e : edges) {
    auto ra = find(e.a), rb = find(e.b);
    std::size_t id = n + nodes.size();
    nodes.push_back({ra, rb, e.weight, size[ra] + size[rb]});
    parent[ra] = parent[rb] = id;
    size[id] = size[ra] + size[rb];
  }
  return nodes;
}

struct CondensedEdge {
  std::size_t parent;  // cluster label (>= n)
  std::size_t child;   // point (< n) or cluster label
  double lambda;
  std::size_t size;
};

double to_lambda(double distance) { return 1.0 / std::max(distance, 1e-10); }

std::vector<CondensedEdge> condense(std::size_t n, const std::vector<LinkNode>& nodes,
                                    std::size_t min_cluster_size) {
  std::vector<CondensedEdge> out;
  const std::size_t root = n + nodes.size() - 1;
  auto node_size = [&](std::size_t id) { return id < n ? std::size_t{1} : nodes[id - n].size; };
  auto points_below = [&](std::size_t id) {
    std::vector<std::size_t> pts, stack{id};
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      if (x < n) {
        pts.push_back(x);
      } else {
        stack.push_back(nodes[x - n].right);
        stack.push_back(nodes[x - n].left);
      }
    }
    return pts;
  };

  std::size_t next_label = n + 1;
  // (dendrogram node, cluster label it belongs to)
  std::vector<std::pair<std::size_t, std::size_t>> queue{{root, n}};
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    auto [node, label] = queue[qi];
    if (node < n) continue;
    const auto& ln = nodes[node - n];
    double lambda = to_lambda(ln.distance);
    auto ls = node_size(ln.left), rs = node_size(ln.right);
    bool left_big = ls >= min_cluster_size, right_big = rs >= min_cluster_size;
    if (left_big && right_big) {
      auto l = next_label++;
      out.push_back({label, l, lambda, ls});
      queue.push_back({ln.left, l});
      auto r = next_label++;
      out.push_back({label, r, lambda, rs});
      queue.push_back({ln.right, r});
      continue;
    }
    for (auto [child, big] : {std::pair{ln.left, left_big}, std::pair{ln.right, right_big}}) {
      if (big) {
        queue.push_back({child, label});
      } else {
        for (auto p : points_below(child)) out.push_back({label, p, lambda, 1});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<int> hdbscan(std::size_t n, const std::function<double(std::size_t, std::size_t)>& distance,
                         const HdbscanParams& params) {
  const std::size_t mcs = std::max<std::size_t>(2, params.min_cluster_size);
  std::vector<int> labels(n, -1);
  if (n < mcs || n < 2) return labels;

  // Core distance: k-th nearest neighbour counting the point itself.
  const std::size_t k = std::max<std::size_t>(1, params.min_samples);
  std::vector<double> core(n, 0.0);
  if (k > 1) {
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) row[j] = i == j ? 0.0 : distance(i, j);
      auto kth = std::min(k, n) - 1;
      std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kth), row.end());
      core[i] = row[kth];
    }
  }

  auto tree = condense(n, single_linkage(n, minimum_spanning_tree(n, core, distance)), mcs);

  // Cluster labels are n .. max_label.
  std::size_t max_label = n;
  for (const auto& e : tree) max_label = std::max({max_label, e.parent, e.child >= n ? e.child : n});
  const std::size_t count = max_label - n + 1;
  std::vector<double> birth(count, 0.0), stability(count, 0.0), max_child_lambda(count, 0.0);
  std::vector<std::size_t> parent_of(count, 0);
  std::vector<std::vector<std::size_t>> children(count);
  for (const auto& e : tree) {
    if (e.child >= n) {
      birth[e.child - n] = e.lambda;
      parent_of[e.child - n] = e.parent;
      children[e.parent - n].push_back(e.child);
    }
  }
  for (const auto& e : tree) {
    auto c = e.parent - n;
    stability[c] += static_cast<double>(e.size) * (e.lambda - birth[c]);
    max_child_lambda[c] = std::max(max_child_lambda[c], e.lambda);
  }

  // Excess of mass, children before parents (children carry larger labels).
  // The root is left out; equal stability keeps the parent.
  std::vector<bool> selected(count, false);
  for (std::size_t c = count; c-- > 1;) {
    double subtree = 0;
    for (auto ch : children[c]) subtree += stability[ch - n];
    if (!children[c].empty() && subtree > stability[c]) {
      stability[c] = subtree;
    } else {
      selected[c] = true;
      std::vector<std::size_t> stack(children[c].begin(), children[c].end());
      while (!stack.empty()) {
        auto x = stack.back() - n;
        stack.pop_back();
        selected[x] = false;
        stack.insert(stack.end(), children[x].begin(), children[x].end());
      }
    }
  }
  const bool root_only = std::none_of(selected.begin(), selected.end(), [](bool s) { return s; });

  std::vector<long> raw(n, -1);
  for (const auto& e : tree) {
    if (e.child >= n) continue;
    std::size_t c = e.parent;
    while (c != n && !selected[c - n]) c = parent_of[c - n];
    if (c != n) {
      raw[e.child] = static_cast<long>(c);
    } else if (root_only && e.lambda >= max_child_lambda[0]) {
      raw[e.child] = static_cast<long>(n);
    }
  }

  // Renumber by smallest member.
  std::map<long, int> renumber;
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] < 0) continue;
    auto [it, inserted] = renumber.try_emplace(raw[i], static_cast<int>(renumber.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::vector<int> hdbscan(const std::vector<NameVector>& vectors, const HdbscanParams& params) {
  return hdbscan(
      vectors.size(),
      [&](std::size_t i, std::size_t j) {
        return cosine_distance(vectors[i].features, vectors[j].features);
      },
      params);
}

}  // namespace trident::clustering
