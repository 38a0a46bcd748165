#pragma once

// Gibbs measure over admissible flow paths and the soft correspondences it
// induces, plus hard-map extraction from a soft correspondence.

#include "corrsync/collection.hpp"
#include "corrsync/flow_graph.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace corrsync {

struct PathDistribution {
  std::vector<PathRecord> paths;
  std::vector<double> probabilities;  // weight / sum of weights, same order as paths
  double lambda = 0.0;
};

// Normalizes path weights. Throws EmptyPathSet when no path survives.
PathDistribution gibbs_distribution(std::vector<PathRecord> paths, double lambda);

struct SoftRow {
  std::size_t source_vertex = 0;
  Distribution support;

  friend bool operator==(const SoftRow&, const SoftRow&) = default;
};

struct SoftCorrespondence {
  std::string source_id;
  std::string target_id;
  double lambda = 0.0;
  double beta = 1.0;
  std::size_t path_count = 0;
  std::vector<SoftRow> rows;

  // Row for a queried source vertex; throws EmptyRow if it was not queried.
  const SoftRow& row_for(std::size_t source_vertex) const;
};

struct PropagationOptions {
  PathOptions paths;  // lambda, max_paths, strict
};

// Path distribution for the ordered pair (source -> target).
PathDistribution admissible_paths(const ShapeCollection& collection, std::size_t source,
                                  std::size_t target, const PathOptions& options);

// Pushes each queried vertex through every admissible path's composed map and
// aggregates the Gibbs mass per target vertex.
SoftCorrespondence propagate_soft(const ShapeCollection& collection, std::size_t source,
                                  std::size_t target, const std::vector<std::size_t>& source_points,
                                  const PropagationOptions& options = {});

// Per-row argmax; ties go to the lowest target index. The result is a partial
// map: only queried rows are meaningful, the rest map to 0.
CorrespondenceMap mle(const SoftCorrespondence& soft, std::size_t source_size,
                      std::size_t target_size);

// Per-row argmin over support points x of sum_q mass(q) d_geo(x, q)^2.
CorrespondenceMap frechet_mean(const SoftCorrespondence& soft, const GeodesicOracle& target_oracle,
                               std::size_t source_size);

std::size_t mle_vertex(const Distribution& row);
std::size_t frechet_vertex(const Distribution& row, const GeodesicOracle& oracle);

// Mass of the row within geodesic distance R of `center`.
double ball_mass(const Distribution& row, std::size_t center, double radius,
                 const GeodesicOracle& oracle);

struct PairResult {
  std::size_t source = 0;
  std::size_t target = 0;
  SoftCorrespondence soft;
  CorrespondenceMap mle;
  std::optional<CorrespondenceMap> frechet;
};

// Soft correspondences and hard maps for every ordered pair. `queries[i]` is
// the query set on shape i (landmarks by default). Frechet maps are produced
// when oracles are given (one per shape).
std::vector<PairResult> all_pairs_soft(const ShapeCollection& collection,
                                       const std::vector<std::vector<std::size_t>>& queries,
                                       const PropagationOptions& options = {},
                                       const std::vector<GeodesicOracle>* oracles = nullptr);

// Landmark indices of every shape, used as the default query sets.
std::vector<std::vector<std::size_t>> landmark_queries(const ShapeCollection& collection);

// 0.5 * L1 distance between two sparse distributions.
double total_variation(const Distribution& a, const Distribution& b);

}  // namespace corrsync
