#include "corrsync/baselines.hpp"

#include "corrsync/error.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace corrsync {

namespace {

double at(const Eigen::MatrixXd& m, std::size_t a, std::size_t b) {
  return m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

// =============================================================================
// Minimum spanning tree
// =============================================================================

SpanningTree minimum_spanning_tree(const Eigen::MatrixXd& distances) {
  const auto n = static_cast<std::size_t>(distances.rows());
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) edges.emplace_back(at(distances, a, b), a, b);
  }
  std::sort(edges.begin(), edges.end());
  SpanningTree tree;
  tree.adjacency.resize(n);
  DisjointSets sets(n);
  for (const auto& [w, a, b] : edges) {
    if (!sets.unite(a, b)) continue;
    tree.edges.emplace_back(a, b);
    tree.adjacency[a].push_back(b);
    tree.adjacency[b].push_back(a);
    tree.total_weight += w;
    if (tree.edges.size() + 1 == n) break;
  }
  for (auto& adj : tree.adjacency) std::sort(adj.begin(), adj.end());
  return tree;
}

std::vector<std::size_t> SpanningTree::path(std::size_t a, std::size_t b) const {
  const std::size_t n = adjacency.size();
  if (a >= n || b >= n) throw Error(ErrorCode::IndexOutOfRange, "tree path endpoint out of range");
  std::vector<std::size_t> parent(n, n);
  std::queue<std::size_t> queue;
  parent[a] = a;
  queue.push(a);
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop();
    if (u == b) break;
    for (std::size_t v : adjacency[u]) {
      if (parent[v] == n) {
        parent[v] = u;
        queue.push(v);
      }
    }
  }
  if (parent[b] == n) throw Error(ErrorCode::Disconnected, fmt::format("{} and {} not connected in tree", a, b));
  std::vector<std::size_t> out{b};
  while (out.back() != a) out.push_back(parent[out.back()]);
  std::reverse(out.begin(), out.end());
  return out;
}

// =============================================================================
// Propagation
// =============================================================================

CorrespondenceMap compose_along(const ShapeCollection& collection, const std::vector<std::size_t>& path) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
  CorrespondenceMap result = collection.map(path.front(), path.front());
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    result = compose_maps(collection.map(path[k], path[k + 1]), result);
  }
  return result;
}

CorrespondenceMap direct_propagate(const ShapeCollection& collection, std::size_t source,
                                   std::size_t target) {
  return collection.map(source, target);
}

PropagatedMap mst_propagate(const ShapeCollection& collection, const SpanningTree& tree,
                            std::size_t source, std::size_t target) {
  auto path = tree.path(source, target);
  return {compose_along(collection, path), std::move(path)};
}

PropagatedMap mst_propagate(const ShapeCollection& collection, std::size_t source, std::size_t target) {
  return mst_propagate(collection, minimum_spanning_tree(collection.distances()), source, target);
}

std::vector<std::vector<std::size_t>> threshold_components(const Eigen::MatrixXd& distances,
                                                           double epsilon) {
  const auto n = static_cast<std::size_t>(distances.rows());
  DisjointSets sets(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (at(distances, a, b) <= epsilon) sets.unite(a, b);
    }
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = sets.find(v);
    if (slot[r] == n) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(v);
  }
  return groups;
}

double default_epsilon(const Eigen::MatrixXd& distances) {
  const auto n = static_cast<std::size_t>(distances.rows());
  std::vector<double> values;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) values.push_back(at(distances, a, b));
  }
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  // Connectivity is monotone in epsilon; find the first value that connects.
  std::size_t lo = 0;
  std::size_t hi = values.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (threshold_components(distances, values[mid]).size() == 1) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return values[lo];
}

std::vector<std::size_t> shortest_path(const Eigen::MatrixXd& distances, std::size_t source,
                                       std::size_t target, double epsilon, PathCost cost_kind,
                                       double beta) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (source >= n || target >= n) throw Error(ErrorCode::IndexOutOfRange, "shortest path endpoint out of range");
  if (source == target) return {source};
  auto cost = [&](std::size_t a, std::size_t b) {
    const double d = at(distances, a, b);
    switch (cost_kind) {
      case PathCost::Linear: return d;
      case PathCost::NegLogWeight: return beta * d * d;
      case PathCost::Squared: break;
    }
    return d * d;
  };
  auto usable = [&](std::size_t a, std::size_t b) { return a != b && at(distances, a, b) <= epsilon; };

  // Distances to the target, then a greedy lexicographic walk along tight edges.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> to_target(n, inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  to_target[target] = 0.0;
  heap.emplace(0.0, target);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > to_target[u]) continue;
    for (std::size_t v = 0; v < n; ++v) {
      if (!usable(u, v)) continue;
      const double nd = d + cost(v, u);
      if (nd < to_target[v]) {
        to_target[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  if (to_target[source] == inf) {
    const auto groups = threshold_components(distances, epsilon);
    std::string parts;
    for (const auto& g : groups) parts += fmt::format("{}{}", parts.empty() ? "" : " ", g);
    throw Error(ErrorCode::Disconnected,
                fmt::format("shapes {} and {} are disconnected at epsilon = {}; components: {}", source,
                            target, epsilon, parts));
  }

  const double tolerance = 1e-12 * std::max(1.0, to_target[source]);
  std::vector<std::size_t> path{source};
  std::vector<bool> visited(n, false);
  visited[source] = true;
  std::size_t u = source;
  while (u != target) {
    std::size_t chosen = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (visited[v] || !usable(u, v) || to_target[v] == inf) continue;
      if (cost(u, v) + to_target[v] <= to_target[u] + tolerance) {
        chosen = v;
        break;
      }
    }
    if (chosen == n) throw Error(ErrorCode::Disconnected, "shortest path reconstruction failed");
    visited[chosen] = true;
    path.push_back(chosen);
    u = chosen;
  }
  return path;
}

PropagatedMap shortest_path_propagate(const ShapeCollection& collection, std::size_t source,
                                      std::size_t target, double epsilon, PathCost cost) {
  auto path = shortest_path(collection.distances(), source, target, epsilon, cost, collection.beta());
  return {compose_along(collection, path), std::move(path)};
}

}  // namespace corrsync
