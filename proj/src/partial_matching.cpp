#include "corrsync/partial_matching.hpp"

#include "corrsync/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

namespace corrsync {

std::vector<std::pair<std::size_t, std::size_t>> MatchList::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& e : entries) {
    if (e.target) out.emplace_back(e.source, *e.target);
  }
  return out;
}

std::size_t MatchList::matched_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const MatchEntry& e) { return e.target.has_value(); }));
}

// =============================================================================
// Landmarks
// =============================================================================

LandmarkSet fps_landmarks(const Shape& shape, std::size_t count, std::size_t start,
                          const GeodesicOracle& oracle) {
  const std::size_t n = shape.size();
  if (oracle.size() != n) throw Error(ErrorCode::IdMismatch, "oracle does not belong to this shape");
  if (count > n) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("cannot pick {} landmarks from {} points", count, n));
  }
  if (start >= n) throw Error(ErrorCode::IndexOutOfRange, fmt::format("start vertex {} out of range", start));
  LandmarkSet set{shape.id, {}, LandmarkMethod::Fps};
  if (count == 0) return set;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t next = start;
  for (std::size_t k = 0; k < count; ++k) {
    set.vertices.push_back(next);
    const auto row = oracle.row(next);
    for (std::size_t v = 0; v < n; ++v) nearest[v] = std::min(nearest[v], (*row)[v]);
    nearest[next] = 0.0;
    double best = -1.0;
    for (std::size_t v = 0; v < n; ++v) {
      if (nearest[v] > best) {
        best = nearest[v];
        next = v;
      }
    }
  }
  return set;
}

// =============================================================================
// Mutual partial matching
// =============================================================================

namespace {

void check_ball_separation(const LandmarkSet& landmarks, double radius, const GeodesicOracle& oracle) {
  const auto& v = landmarks.vertices;
  for (std::size_t a = 0; a < v.size(); ++a) {
    for (std::size_t b = a + 1; b < v.size(); ++b) {
      const double d = oracle.distance(v[a], v[b]);
      if (!(d > 2.0 * radius)) {
        throw Error(ErrorCode::BallOverlap,
                    fmt::format("shape '{}': landmarks {} and {} are {} apart, balls of radius {} overlap",
                                landmarks.shape_id, v[a], v[b], d, radius));
      }
    }
  }
}

}  // namespace

MatchList gp_partial_match(const SoftCorrespondence& soft_12, const SoftCorrespondence& soft_21,
                           const LandmarkSet& landmarks_1, const LandmarkSet& landmarks_2,
                           double radius, const GeodesicOracle& oracle_1,
                           const GeodesicOracle& oracle_2) {
  if (radius < 0.0) throw Error(ErrorCode::InvalidArgument, "radius must be >= 0");
  check_ball_separation(landmarks_1, radius, oracle_1);
  check_ball_separation(landmarks_2, radius, oracle_2);

  MatchList matches;
  std::set<std::size_t> taken;
  for (std::size_t v1 : landmarks_1.vertices) {
    const Distribution& forward = soft_12.row_for(v1).support;
    MatchEntry entry{v1, std::nullopt, MatchProvenance::Partial};
    for (std::size_t v2 : landmarks_2.vertices) {
      if (taken.contains(v2)) continue;
      if (ball_mass(forward, v2, radius, oracle_2) < 0.5) continue;
      const Distribution& reverse = soft_21.row_for(v2).support;
      if (ball_mass(reverse, v1, radius, oracle_1) >= 0.5) {
        entry.target = v2;
        taken.insert(v2);
        break;
      }
    }
    matches.entries.push_back(entry);
  }
  return matches;
}

// =============================================================================
// Curvature extrema
// =============================================================================

std::vector<std::size_t> detect_extrema(const std::vector<std::vector<std::size_t>>& adjacency,
                                        const std::vector<double>& field, std::size_t hops) {
  const std::size_t n = adjacency.size();
  if (field.size() != n) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("field has {} values for {} vertices", field.size(), n));
  }
  std::vector<std::size_t> out;
  std::vector<std::size_t> depth(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    // Breadth-first ball of `hops` hops.
    std::vector<std::size_t> visited{v};
    depth[v] = 0;
    bool is_max = true;
    for (std::size_t head = 0; head < visited.size() && is_max; ++head) {
      const std::size_t u = visited[head];
      if (depth[u] >= hops) continue;
      for (std::size_t w : adjacency[u]) {
        if (depth[w] != n) continue;
        depth[w] = depth[u] + 1;
        visited.push_back(w);
        if (!(field[v] > field[w])) {
          is_max = false;
          break;
        }
      }
    }
    for (std::size_t u : visited) depth[u] = n;
    if (is_max) out.push_back(v);
  }
  return out;
}

ExtremaSet detect_extrema(const Shape& shape, const GeodesicOracle& oracle, std::size_t hops) {
  if (!shape.scalar_field) {
    throw Error(ErrorCode::MissingField, fmt::format("shape '{}' has no scalar field", shape.id));
  }
  std::vector<std::vector<std::size_t>> adjacency(oracle.size());
  for (std::size_t v = 0; v < oracle.size(); ++v) {
    for (const auto& [u, w] : oracle.neighbors(v)) adjacency[v].push_back(u);
  }
  return {shape.id, detect_extrema(adjacency, *shape.scalar_field, hops)};
}

// =============================================================================
// Stable matching
// =============================================================================

std::vector<std::optional<std::size_t>> gale_shapley(const Eigen::MatrixXd& proposer_cost,
                                                     const Eigen::MatrixXd& receiver_cost) {
  const auto proposers = static_cast<std::size_t>(proposer_cost.rows());
  const auto receivers = static_cast<std::size_t>(proposer_cost.cols());
  if (static_cast<std::size_t>(receiver_cost.rows()) != receivers ||
      static_cast<std::size_t>(receiver_cost.cols()) != proposers) {
    throw Error(ErrorCode::InvalidArgument, "receiver cost matrix must be the transpose shape");
  }
  auto pc = [&](std::size_t a, std::size_t b) {
    return proposer_cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  };
  auto rc = [&](std::size_t b, std::size_t a) {
    return receiver_cost(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a));
  };
  std::vector<std::vector<std::size_t>> preferences(proposers);
  for (std::size_t a = 0; a < proposers; ++a) {
    for (std::size_t b = 0; b < receivers; ++b) {
      if (std::isfinite(pc(a, b)) && std::isfinite(rc(b, a))) preferences[a].push_back(b);
    }
    std::stable_sort(preferences[a].begin(), preferences[a].end(),
                     [&](std::size_t x, std::size_t y) { return pc(a, x) < pc(a, y); });
  }
  auto receiver_prefers = [&](std::size_t b, std::size_t a_new, std::size_t a_old) {
    const double cn = rc(b, a_new);
    const double co = rc(b, a_old);
    return cn < co || (cn == co && a_new < a_old);
  };

  std::vector<std::optional<std::size_t>> partner(proposers);
  std::vector<std::optional<std::size_t>> held(receivers);
  std::vector<std::size_t> next_choice(proposers, 0);
  std::set<std::size_t> free;
  for (std::size_t a = 0; a < proposers; ++a) free.insert(a);
  while (!free.empty()) {
    const std::size_t a = *free.begin();
    if (next_choice[a] >= preferences[a].size()) {
      free.erase(free.begin());
      continue;
    }
    const std::size_t b = preferences[a][next_choice[a]++];
    if (!held[b]) {
      held[b] = a;
      partner[a] = b;
      free.erase(a);
    } else if (receiver_prefers(b, a, *held[b])) {
      const std::size_t dumped = *held[b];
      partner[dumped].reset();
      free.insert(dumped);
      held[b] = a;
      partner[a] = b;
      free.erase(a);
    }
  }
  return partner;
}

MatchList stable_curvature_match(const Shape& shape_i, const Shape& shape_j,
                                 const std::vector<std::size_t>& extrema_i,
                                 const std::vector<std::size_t>& extrema_j, double delta,
                                 const GeodesicOracle& oracle_i, const GeodesicOracle& oracle_j) {
  const KdTree tree_i(shape_i.points);
  const KdTree tree_j(shape_j.points);
  const double inf = std::numeric_limits<double>::infinity();
  const auto ni = static_cast<Eigen::Index>(extrema_i.size());
  const auto nj = static_cast<Eigen::Index>(extrema_j.size());
  Eigen::MatrixXd cost_ij = Eigen::MatrixXd::Constant(ni, nj, inf);
  Eigen::MatrixXd cost_ji = Eigen::MatrixXd::Constant(nj, ni, inf);
  for (Eigen::Index a = 0; a < ni; ++a) {
    const std::size_t projected = tree_j.nearest(shape_i.points.at(extrema_i[static_cast<std::size_t>(a)]));
    for (Eigen::Index b = 0; b < nj; ++b) {
      cost_ij(a, b) = oracle_j.distance(projected, extrema_j[static_cast<std::size_t>(b)]);
    }
  }
  for (Eigen::Index b = 0; b < nj; ++b) {
    const std::size_t projected = tree_i.nearest(shape_j.points.at(extrema_j[static_cast<std::size_t>(b)]));
    for (Eigen::Index a = 0; a < ni; ++a) {
      cost_ji(b, a) = oracle_i.distance(projected, extrema_i[static_cast<std::size_t>(a)]);
    }
  }
  // Non-mutual candidates are removed from both preference lists.
  for (Eigen::Index a = 0; a < ni; ++a) {
    for (Eigen::Index b = 0; b < nj; ++b) {
      if (!(cost_ij(a, b) < delta && cost_ji(b, a) < delta)) {
        cost_ij(a, b) = inf;
        cost_ji(b, a) = inf;
      }
    }
  }
  const auto partner = gale_shapley(cost_ij, cost_ji);
  MatchList matches;
  for (std::size_t a = 0; a < partner.size(); ++a) {
    if (partner[a]) {
      matches.entries.push_back({extrema_i[a], extrema_j[*partner[a]], MatchProvenance::Curvature});
    }
  }
  return matches;
}

// =============================================================================
// Joint farthest-point refinement
// =============================================================================

MatchList joint_fps_refine(const MatchList& seed, const MatchList& candidates,
                           std::size_t max_matches, const GeodesicOracle& oracle_i,
                           const GeodesicOracle& oracle_j) {
  const auto seed_pairs = seed.pairs();
  if (max_matches < seed_pairs.size()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("max matches {} below the {} seed matches", max_matches, seed_pairs.size()));
  }
  MatchList out;
  std::set<std::size_t> used_i;
  std::set<std::size_t> used_j;
  for (const auto& e : seed.entries) {
    if (!e.target) continue;
    out.entries.push_back(e);
    used_i.insert(e.source);
    used_j.insert(*e.target);
  }

  auto pool = candidates.pairs();
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> near_i(pool.size(), inf);
  std::vector<double> near_j(pool.size(), inf);
  auto absorb = [&](std::size_t vi, std::size_t vj) {
    const auto row_i = oracle_i.row(vi);
    const auto row_j = oracle_j.row(vj);
    for (std::size_t c = 0; c < pool.size(); ++c) {
      near_i[c] = std::min(near_i[c], (*row_i)[pool[c].first]);
      near_j[c] = std::min(near_j[c], (*row_j)[pool[c].second]);
    }
  };
  for (const auto& [vi, vj] : seed_pairs) absorb(vi, vj);

  std::vector<bool> removed(pool.size(), false);
  while (out.entries.size() < max_matches) {
    std::size_t best = pool.size();
    double best_energy = -inf;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (removed[c] || used_i.contains(pool[c].first) || used_j.contains(pool[c].second)) continue;
      const double energy = near_i[c] + near_j[c];
      if (best == pool.size() || energy > best_energy) {
        best = c;
        best_energy = energy;
      }
    }
    if (best == pool.size()) break;
    removed[best] = true;
    const auto [vi, vj] = pool[best];
    out.entries.push_back({vi, vj, MatchProvenance::Partial});
    used_i.insert(vi);
    used_j.insert(vj);
    absorb(vi, vj);
  }
  return out;
}

// =============================================================================
// Dense interpolation
// =============================================================================

CorrespondenceMap interpolate_dense(const MatchList& matches, const Shape& shape_i,
                                    const Shape& shape_j, const GeodesicOracle& oracle_i,
                                    std::size_t k_neighbors) {
  const auto pairs = matches.pairs();
  if (pairs.empty()) throw Error(ErrorCode::NoMatches, "interpolation needs at least one match");
  if (k_neighbors == 0) throw Error(ErrorCode::InvalidArgument, "k_neighbors must be positive");
  const std::size_t k = std::min(k_neighbors, pairs.size());
  std::vector<std::shared_ptr<const std::vector<double>>> rows;
  rows.reserve(pairs.size());
  for (const auto& [s, t] : pairs) {
    if (t >= shape_j.size()) throw Error(ErrorCode::IndexOutOfRange, "match target out of range");
    rows.push_back(oracle_i.row(s));
  }
  const KdTree tree_j(shape_j.points);

  std::vector<std::size_t> images(shape_i.size());
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t v = 0; v < shape_i.size(); ++v) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = (*rows[a])[v];
                        const double db = (*rows[b])[v];
                        return da < db || (da == db && a < b);
                      });
    if ((*rows[order[0]])[v] == 0.0 || pairs[order[0]].first == v) {
      images[v] = pairs[order[0]].second;
      continue;
    }
    Point3 blended = Point3::Zero();
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      const double w = 1.0 / (*rows[order[r]])[v];
      blended += w * shape_j.points[pairs[order[r]].second];
      total += w;
    }
    images[v] = tree_j.nearest(blended / total);
  }
  return CorrespondenceMap::from_discrete(shape_i.id, shape_j.id, shape_j.size(), std::move(images));
}

// =============================================================================
// Rigid alignment
// =============================================================================

RigidTransform fit_rigid(const std::vector<Point3>& from, const std::vector<Point3>& to) {
  if (from.size() != to.size() || from.empty()) {
    throw Error(ErrorCode::InvalidArgument, "fit_rigid needs equally sized, non-empty point lists");
  }
  Point3 cf = Point3::Zero();
  Point3 ct = Point3::Zero();
  for (std::size_t k = 0; k < from.size(); ++k) {
    cf += from[k];
    ct += to[k];
  }
  cf /= static_cast<double>(from.size());
  ct /= static_cast<double>(to.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < from.size(); ++k) cov += (from[k] - cf) * (to[k] - ct).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d correction = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) correction(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * correction * svd.matrixU().transpose();
  t.translation = ct - t.rotation * cf;
  return t;
}

namespace {

void check_non_degenerate(const Shape& shape) {
  if (shape.size() < 3) {
    throw Error(ErrorCode::Degenerate, fmt::format("shape '{}' has fewer than 3 points", shape.id));
  }
  Point3 c = Point3::Zero();
  for (const auto& p : shape.points) c += p;
  c /= static_cast<double>(shape.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : shape.points) cov += (p - c) * (p - c).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov);
  const auto s = svd.singularValues();
  if (!(s(1) > 1e-12 * std::max(1.0, s(0)))) {
    throw Error(ErrorCode::Degenerate, fmt::format("shape '{}' is collinear", shape.id));
  }
}

struct Assignment {
  std::vector<std::size_t> images;
  double rms = 0.0;
};

Assignment assign(const Shape& source, const KdTree& tree, const Shape& target, const RigidTransform& t) {
  Assignment a;
  a.images.resize(source.size());
  double total = 0.0;
  for (std::size_t v = 0; v < source.size(); ++v) {
    const Point3 moved = t.apply(source.points[v]);
    a.images[v] = tree.nearest(moved);
    total += (moved - target.points[a.images[v]]).squaredNorm();
  }
  a.rms = std::sqrt(total / static_cast<double>(source.size()));
  return a;
}

}  // namespace

Alignment baseline_pairwise_align(const Shape& source, const Shape& target, std::size_t iterations) {
  check_non_degenerate(source);
  check_non_degenerate(target);
  const KdTree tree(target.points);

  Point3 cs = Point3::Zero();
  Point3 ct = Point3::Zero();
  for (const auto& p : source.points) cs += p;
  for (const auto& p : target.points) ct += p;
  cs /= static_cast<double>(source.size());
  ct /= static_cast<double>(target.size());

  RigidTransform current;
  current.translation = ct - cs;
  Assignment assignment = assign(source, tree, target, current);
  RigidTransform best_transform = current;
  Assignment best = assignment;

  std::vector<Point3> matched(source.size());
  for (std::size_t it = 0; it < iterations && best.rms > 0.0; ++it) {
    for (std::size_t v = 0; v < source.size(); ++v) matched[v] = target.points[assignment.images[v]];
    current = fit_rigid(source.points, matched);
    Assignment next = assign(source, tree, target, current);
    const bool unchanged = next.images == assignment.images;
    assignment = std::move(next);
    if (assignment.rms < best.rms) {
      best = assignment;
      best_transform = current;
    }
    if (unchanged) break;
  }
  return {best_transform,
          CorrespondenceMap::from_discrete(source.id, target.id, target.size(), std::move(best.images)),
          best.rms};
}

// =============================================================================
// Consistency through the mean shape
// =============================================================================

std::size_t frechet_mean_shape(const Eigen::MatrixXd& distances) {
  const auto n = distances.rows();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty collection");
  Eigen::Index best = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) sum += distances(k, j) * distances(k, j);
    if (sum < best_sum) {
      best_sum = sum;
      best = k;
    }
  }
  return static_cast<std::size_t>(best);
}

ConsistentTable consistent_via_mean(
    const ShapeCollection& collection,
    const std::map<std::pair<std::size_t, std::size_t>, CorrespondenceMap>& hard_maps) {
  ConsistentTable table;
  table.mean_index = frechet_mean_shape(collection.distances());
  const std::size_t m = table.mean_index;
  auto lookup = [&](std::size_t a, std::size_t b) -> const CorrespondenceMap& {
    auto it = hard_maps.find({a, b});
    if (it == hard_maps.end()) {
      throw Error(ErrorCode::MissingMap,
                  fmt::format("no hard map '{}' -> '{}' through the mean shape", collection.shape(a).id,
                              collection.shape(b).id));
    }
    return it->second;
  };
  const std::size_t n = collection.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (i == m) {
        table.maps.emplace(std::pair{i, j}, lookup(m, j));
      } else if (j == m) {
        table.maps.emplace(std::pair{i, j}, lookup(i, m));
      } else {
        table.maps.emplace(std::pair{i, j}, compose_maps(lookup(m, j), lookup(i, m)));
      }
    }
  }
  return table;
}

ConsistentTable consistent_via_mean(const ShapeCollection& collection) {
  return consistent_via_mean(collection, collection.maps());
}

std::size_t cycle_violations(const ConsistentTable& table, std::size_t shape_count) {
  std::size_t violations = 0;
  for (std::size_t i = 0; i < shape_count; ++i) {
    for (std::size_t j = 0; j < shape_count; ++j) {
      for (std::size_t k = 0; k < shape_count; ++k) {
        if (i == j || j == k || i == k) continue;
        const auto composed = compose_maps(table.maps.at({j, k}), table.maps.at({i, j}));
        if (!(composed == table.maps.at({i, k}))) ++violations;
      }
    }
  }
  return violations;
}

}  // namespace corrsync
