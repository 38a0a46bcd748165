#include "corrsync/soft_correspondence.hpp"

#include "corrsync/error.hpp"
#include "corrsync/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace corrsync {

PathDistribution gibbs_distribution(std::vector<PathRecord> paths, double lambda) {
  PathDistribution dist;
  dist.lambda = lambda;
  double total = 0.0;
  for (const auto& p : paths) total += p.weight;
  if (paths.empty() || !(total > 0.0)) {
    throw Error(ErrorCode::EmptyPathSet,
                fmt::format("no admissible path with positive weight at lambda = {}", lambda));
  }
  dist.probabilities.reserve(paths.size());
  for (const auto& p : paths) dist.probabilities.push_back(p.weight / total);
  dist.paths = std::move(paths);
  return dist;
}

const SoftRow& SoftCorrespondence::row_for(std::size_t source_vertex) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), source_vertex,
                             [](const SoftRow& r, std::size_t v) { return r.source_vertex < v; });
  if (it == rows.end() || it->source_vertex != source_vertex) {
    throw Error(ErrorCode::EmptyRow,
                fmt::format("soft correspondence {}->{} has no row for vertex {}", source_id,
                            target_id, source_vertex));
  }
  return *it;
}

PathDistribution admissible_paths(const ShapeCollection& collection, std::size_t source,
                                  std::size_t target, const PathOptions& options) {
  const FlowMatrix flow = directed_flow_matrix(collection.distances(), source, target, collection.beta());
  return gibbs_distribution(enumerate_paths(flow, collection.beta(), options), options.lambda);
}

SoftCorrespondence propagate_soft(const ShapeCollection& collection, std::size_t source,
                                  std::size_t target, const std::vector<std::size_t>& source_points,
                                  const PropagationOptions& options) {
  SoftCorrespondence soft;
  soft.source_id = collection.shape(source).id;
  soft.target_id = collection.shape(target).id;
  soft.lambda = options.paths.lambda;
  soft.beta = collection.beta();

  std::vector<std::size_t> queries = source_points;
  std::sort(queries.begin(), queries.end());
  queries.erase(std::unique(queries.begin(), queries.end()), queries.end());
  for (std::size_t v : queries) {
    if (v >= collection.shape(source).size()) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("query vertex {} outside shape '{}'", v, soft.source_id));
    }
  }

  if (source == target) {
    soft.path_count = 1;
    for (std::size_t v : queries) soft.rows.push_back({v, {{v, 1.0}}});
    return soft;
  }

  const PathDistribution dist = admissible_paths(collection, source, target, options.paths);
  soft.path_count = dist.paths.size();

  // states[k][q]: distribution of query q after the first k edges of the
  // current path. Lexicographic order lets consecutive paths share prefixes.
  std::vector<std::vector<Distribution>> states;
  states.emplace_back();
  for (std::size_t v : queries) states[0].push_back({{v, 1.0}});
  std::vector<std::size_t> previous;

  std::vector<std::map<std::size_t, double>> accumulated(queries.size());
  for (std::size_t p = 0; p < dist.paths.size(); ++p) {
    const auto& vertices = dist.paths[p].vertices;
    std::size_t shared = 0;
    while (shared < previous.size() && shared < vertices.size() && previous[shared] == vertices[shared]) {
      ++shared;
    }
    // states has one entry per vertex of the previous path that is computed.
    states.resize(std::max<std::size_t>(1, std::min(shared, states.size())));
    for (std::size_t k = states.size(); k < vertices.size(); ++k) {
      const std::size_t from = vertices[k - 1];
      const std::size_t to = vertices[k];
      if (!collection.has_map(from, to)) {
        throw Error(ErrorCode::MissingMap,
                    fmt::format("no map '{}' -> '{}' on admissible edge of pair {} -> {}",
                                collection.shape(from).id, collection.shape(to).id, soft.source_id,
                                soft.target_id));
      }
      const CorrespondenceMap& map = collection.map(from, to);
      std::vector<Distribution> next;
      next.reserve(queries.size());
      for (const auto& d : states.back()) next.push_back(push_forward(d, map));
      states.push_back(std::move(next));
    }
    const double prob = dist.probabilities[p];
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (const auto& [t, mass] : states.back()[q]) accumulated[q][t] += prob * mass;
    }
    previous = vertices;
  }

  soft.rows.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    SoftRow row{queries[q], {accumulated[q].begin(), accumulated[q].end()}};
    normalize(row.support);
    soft.rows.push_back(std::move(row));
  }
  return soft;
}

// =============================================================================
// Hard maps
// =============================================================================

std::size_t mle_vertex(const Distribution& row) {
  if (row.empty()) throw Error(ErrorCode::EmptyRow, "cannot take the argmax of an empty row");
  std::size_t best = row.front().first;
  double best_mass = row.front().second;
  for (const auto& [t, mass] : row) {
    // Rows are sorted by vertex, so strict > keeps the lowest index on ties.
    if (mass > best_mass) {
      best = t;
      best_mass = mass;
    }
  }
  return best;
}

std::size_t frechet_vertex(const Distribution& row, const GeodesicOracle& oracle) {
  if (row.empty()) throw Error(ErrorCode::EmptyRow, "cannot take the Frechet mean of an empty row");
  std::size_t best = row.front().first;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& [x, unused] : row) {
    double cost = 0.0;
    for (const auto& [q, mass] : row) {
      const double d = oracle.distance(x, q);
      cost += mass * d * d;
    }
    if (cost < best_cost) {
      best = x;
      best_cost = cost;
    }
  }
  return best;
}

CorrespondenceMap mle(const SoftCorrespondence& soft, std::size_t source_size,
                      std::size_t target_size) {
  std::vector<std::size_t> images(source_size, 0);
  for (const auto& row : soft.rows) {
    if (row.source_vertex >= source_size) {
      throw Error(ErrorCode::IndexOutOfRange, fmt::format("row vertex {} out of range", row.source_vertex));
    }
    images[row.source_vertex] = mle_vertex(row.support);
  }
  return CorrespondenceMap::from_discrete(soft.source_id, soft.target_id, target_size, std::move(images));
}

CorrespondenceMap frechet_mean(const SoftCorrespondence& soft, const GeodesicOracle& target_oracle,
                               std::size_t source_size) {
  if (target_oracle.shape_id() != soft.target_id) {
    throw Error(ErrorCode::IdMismatch,
                fmt::format("oracle is for shape '{}' but soft map targets '{}'",
                            target_oracle.shape_id(), soft.target_id));
  }
  std::vector<std::size_t> images(source_size, 0);
  for (const auto& row : soft.rows) {
    if (row.source_vertex >= source_size) {
      throw Error(ErrorCode::IndexOutOfRange, fmt::format("row vertex {} out of range", row.source_vertex));
    }
    images[row.source_vertex] = frechet_vertex(row.support, target_oracle);
  }
  return CorrespondenceMap::from_discrete(soft.source_id, soft.target_id, target_oracle.size(),
                                          std::move(images));
}

double ball_mass(const Distribution& row, std::size_t center, double radius,
                 const GeodesicOracle& oracle) {
  if (radius < 0.0) throw Error(ErrorCode::InvalidArgument, "ball radius must be >= 0");
  const auto dist = oracle.row(center);
  double total = 0.0;
  for (const auto& [q, mass] : row) {
    if (q == center || (*dist).at(q) <= radius) total += mass;
  }
  return total;
}

double total_variation(const Distribution& a, const Distribution& b) {
  std::map<std::size_t, double> diff;
  for (const auto& [v, m] : a) diff[v] += m;
  for (const auto& [v, m] : b) diff[v] -= m;
  double total = 0.0;
  for (const auto& e : diff) total += std::abs(e.second);
  return 0.5 * total;
}

// =============================================================================
// All pairs
// =============================================================================

std::vector<std::vector<std::size_t>> landmark_queries(const ShapeCollection& collection) {
  std::vector<std::vector<std::size_t>> queries;
  for (const auto& s : collection.shapes()) queries.push_back(s.landmarks);
  return queries;
}

std::vector<PairResult> all_pairs_soft(const ShapeCollection& collection,
                                       const std::vector<std::vector<std::size_t>>& queries,
                                       const PropagationOptions& options,
                                       const std::vector<GeodesicOracle>* oracles) {
  const std::size_t n = collection.size();
  if (queries.size() != n) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{} query sets for {} shapes", queries.size(), n));
  }
  if (oracles && oracles->size() != n) {
    throw Error(ErrorCode::InvalidArgument, "need one geodesic oracle per shape");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  std::vector<PairResult> results(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    try {
      PairResult r;
      r.source = i;
      r.target = j;
      r.soft = propagate_soft(collection, i, j, queries[i], options);
      r.mle = mle(r.soft, collection.shape(i).size(), collection.shape(j).size());
      if (oracles) r.frechet = frechet_mean(r.soft, (*oracles)[j], collection.shape(i).size());
      results[k] = std::move(r);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("pair ({},{}) '{}' -> '{}': {}", i, j, collection.shape(i).id,
                                        collection.shape(j).id, e.what()));
    }
  });
  return results;
}

}  // namespace corrsync
