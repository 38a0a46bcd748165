#pragma once

// Landmark selection, mutual partial matching of landmarks through soft
// correspondences, curvature-extrema stable matching, joint farthest-point
// refinement, dense interpolation, rigid alignment, and consistency through
// the Frechet mean shape.

#include "corrsync/collection.hpp"
#include "corrsync/soft_correspondence.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace corrsync {

enum class LandmarkMethod { Fps, Provided };

struct LandmarkSet {
  std::string shape_id;
  std::vector<std::size_t> vertices;
  LandmarkMethod method = LandmarkMethod::Fps;
};

enum class MatchProvenance { Curvature, Partial };

struct MatchEntry {
  std::size_t source = 0;
  std::optional<std::size_t> target;  // nullopt: landmark left unmatched
  MatchProvenance provenance = MatchProvenance::Partial;

  friend bool operator==(const MatchEntry&, const MatchEntry&) = default;
};

struct MatchList {
  std::vector<MatchEntry> entries;

  // Matched pairs only, in list order.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;
  std::size_t matched_count() const;
};

struct ExtremaSet {
  std::string shape_id;
  std::vector<std::size_t> vertices;
};

// Geodesic farthest-point sampling from `start`; ties go to the lowest index.
LandmarkSet fps_landmarks(const Shape& shape, std::size_t count, std::size_t start,
                          const GeodesicOracle& oracle);

// Landmark v1 on shape 1 matches the first v2 (in landmark order) with
//   P(f12(v1) in ball(v2, R)) >= 0.5  and  P(f21(v2) in ball(v1, R)) >= 0.5.
// Targets already taken are skipped so no vertex is matched twice.
// Throws BallOverlap when two landmarks of one shape are within 2R.
MatchList gp_partial_match(const SoftCorrespondence& soft_12, const SoftCorrespondence& soft_21,
                           const LandmarkSet& landmarks_1, const LandmarkSet& landmarks_2,
                           double radius, const GeodesicOracle& oracle_1,
                           const GeodesicOracle& oracle_2);

// Strict local maxima of `field` over h-hop neighbourhoods, ascending.
std::vector<std::size_t> detect_extrema(const std::vector<std::vector<std::size_t>>& adjacency,
                                        const std::vector<double>& field, std::size_t hops);
ExtremaSet detect_extrema(const Shape& shape, const GeodesicOracle& oracle, std::size_t hops);

// Candidate (a, b) iff the nearest-neighbour projection of a onto S_j lies
// within geodesic delta of b on S_j, and symmetrically on S_i. Gale-Shapley
// with S_i extrema proposing; preferences by ascending projected distance,
// ties by index.
MatchList stable_curvature_match(const Shape& shape_i, const Shape& shape_j,
                                 const std::vector<std::size_t>& extrema_i,
                                 const std::vector<std::size_t>& extrema_j, double delta,
                                 const GeodesicOracle& oracle_i, const GeodesicOracle& oracle_j);

// Gale-Shapley on explicit preference matrices; cost(a, b) = +inf marks a
// non-candidate. Returns partner of each proposer (or nullopt).
std::vector<std::optional<std::size_t>> gale_shapley(const Eigen::MatrixXd& proposer_cost,
                                                     const Eigen::MatrixXd& receiver_cost);

// Greedily extends the seed matches with the candidate maximizing
//   min_a d_i(a_i, v_i) + min_a d_j(a_j, v_j)
// until max_matches. Ties go to the lowest (source, target).
MatchList joint_fps_refine(const MatchList& seed, const MatchList& candidates,
                           std::size_t max_matches, const GeodesicOracle& oracle_i,
                           const GeodesicOracle& oracle_j);

// Inverse-geodesic-distance blend of the target positions of the k nearest
// matched source landmarks, snapped to the nearest target vertex.
CorrespondenceMap interpolate_dense(const MatchList& matches, const Shape& shape_i,
                                    const Shape& shape_j, const GeodesicOracle& oracle_i,
                                    std::size_t k_neighbors);

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
};

struct Alignment {
  RigidTransform transform;
  CorrespondenceMap map;  // source -> nearest target after alignment
  double distance = 0.0;  // root mean square of matched pairs
};

// Iterative closest point with closed-form orthogonal Procrustes steps.
Alignment baseline_pairwise_align(const Shape& source, const Shape& target, std::size_t iterations = 30);

// Least-squares rotation + translation taking `from` onto `to` (paired).
RigidTransform fit_rigid(const std::vector<Point3>& from, const std::vector<Point3>& to);

struct ConsistentTable {
  std::size_t mean_index = 0;
  // maps[{i, j}] is the consistent map i -> j routed through the mean.
  std::map<std::pair<std::size_t, std::size_t>, CorrespondenceMap> maps;
};

// argmin_k sum_j d_kj^2, ties to the lowest index.
std::size_t frechet_mean_shape(const Eigen::MatrixXd& distances);

// f_{j<-i} := f_{j<-M} ∘ f_{M<-i}. `hard_maps[{i, j}]` must hold every map
// into and out of the mean shape.
ConsistentTable consistent_via_mean(const ShapeCollection& collection,
                                    const std::map<std::pair<std::size_t, std::size_t>, CorrespondenceMap>& hard_maps);

// Convenience: consistent table from the collection's stored maps.
ConsistentTable consistent_via_mean(const ShapeCollection& collection);

// Number of triples (i, j, k) of distinct shapes where f_{k<-j} ∘ f_{j<-i} != f_{k<-i}.
std::size_t cycle_violations(const ConsistentTable& table, std::size_t shape_count);

}  // namespace corrsync
