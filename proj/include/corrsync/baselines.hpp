#pragma once

// Non-flow propagation methods: the stored direct map, composition along the
// minimum spanning tree, and composition along a shortest path of the
// epsilon-pruned distance graph.

#include "corrsync/collection.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <utility>
#include <vector>

namespace corrsync {

struct SpanningTree {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (a, b) with a < b, in selection order
  std::vector<std::vector<std::size_t>> adjacency;
  double total_weight = 0.0;

  // Unique tree path from a to b, inclusive.
  std::vector<std::size_t> path(std::size_t a, std::size_t b) const;
};

// Kruskal on D; ties broken by the lexicographically smaller vertex pair.
SpanningTree minimum_spanning_tree(const Eigen::MatrixXd& distances);

// Composition of stored maps along a vertex sequence; the first hop is applied first.
CorrespondenceMap compose_along(const ShapeCollection& collection, const std::vector<std::size_t>& path);

CorrespondenceMap direct_propagate(const ShapeCollection& collection, std::size_t source,
                                   std::size_t target);

struct PropagatedMap {
  CorrespondenceMap map;
  std::vector<std::size_t> path;
};

PropagatedMap mst_propagate(const ShapeCollection& collection, const SpanningTree& tree,
                            std::size_t source, std::size_t target);
PropagatedMap mst_propagate(const ShapeCollection& collection, std::size_t source, std::size_t target);

enum class PathCost { Squared, Linear, NegLogWeight };

// Dijkstra over edges with d <= epsilon. Ties resolve to the lexicographically
// smallest vertex sequence. Throws Disconnected listing the components.
std::vector<std::size_t> shortest_path(const Eigen::MatrixXd& distances, std::size_t source,
                                       std::size_t target, double epsilon,
                                       PathCost cost = PathCost::Squared, double beta = 1.0);

PropagatedMap shortest_path_propagate(const ShapeCollection& collection, std::size_t source,
                                      std::size_t target, double epsilon,
                                      PathCost cost = PathCost::Squared);

// Smallest threshold that keeps the pruned graph connected.
double default_epsilon(const Eigen::MatrixXd& distances);

// Connected components of the graph with edges d <= epsilon, each sorted.
std::vector<std::vector<std::size_t>> threshold_components(const Eigen::MatrixXd& distances,
                                                           double epsilon);

}  // namespace corrsync
