#pragma once

// Numerical experiments behind the flow condition: random walks on a planar
// lattice, parallel transport and holonomy on the unit sphere, and the
// enhanced eyes-on-the-prize curve condition.

#include "corrsync/flow_graph.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace corrsync {

// ----------------------------------------------------------------------------
// Lattice walks
// ----------------------------------------------------------------------------

// side x side grid on the unit square with 8-neighbour connectivity.
// Vertex id = row * side + column; coordinates (column, row) / (side - 1).
class LatticeGraph {
 public:
  explicit LatticeGraph(std::size_t side = 31);

  std::size_t side() const { return side_; }
  std::size_t size() const { return side_ * side_; }
  Eigen::Vector2d position(std::size_t v) const;
  const std::vector<std::size_t>& neighbours(std::size_t v) const { return neighbours_.at(v); }
  const std::vector<std::vector<std::size_t>>& neighbours() const { return neighbours_; }
  std::size_t vertex(std::size_t row, std::size_t column) const { return row * side_ + column; }

  // Euclidean distances between all vertices.
  Eigen::MatrixXd euclidean() const;

 private:
  std::size_t side_;
  std::vector<std::vector<std::size_t>> neighbours_;
};

enum class WalkMode { Standard, NonBacktracking, EyesOnPrize };

WalkMode parse_walk_mode(const std::string& text);
std::string to_string(WalkMode mode);

struct LatticeWalkOptions {
  WalkMode mode = WalkMode::EyesOnPrize;
  std::size_t source = 0;
  std::size_t target = 0;  // 0 with source 0 means "opposite corner"
  std::size_t count = 100;
  std::uint64_t seed = 7;
  std::size_t max_steps = 1'000'000;
  std::size_t max_attempts_per_walk = 1000;
  double beta = 1.0;
};

struct LatticeWalkStats {
  std::vector<std::vector<std::size_t>> trajectories;  // reached walks only
  std::vector<double> max_deviation;                    // per walk, from the source-target segment
  std::size_t discarded = 0;
  double deviation_band = 0.0;  // max over walks
};

LatticeWalkStats lattice_walks(const LatticeGraph& lattice, const LatticeWalkOptions& options);

// Seed of the attempt-th try of walk `walk` under a master seed; independent of
// thread scheduling.
std::uint64_t walk_seed(std::uint64_t master, std::uint64_t walk, std::uint64_t attempt);

// ----------------------------------------------------------------------------
// Sphere geometry (unit sphere, K = 1)
// ----------------------------------------------------------------------------

using Vec3 = Eigen::Vector3d;

struct TangentVector {
  Vec3 base;
  Vec3 vector;
};

struct GeodesicLeg {
  Vec3 from;
  Vec3 to;
};

// Chain of great-circle legs; each leg starts where the previous one ends.
struct GeodesicLegPath {
  std::vector<GeodesicLeg> legs;

  static GeodesicLegPath through(const std::vector<Vec3>& points);
};

// Closed form: rotation about each leg's great-circle axis.
TangentVector transport_along_path(const GeodesicLegPath& path, const TangentVector& v);

// Fixed-step RK4 integration of V' = -(V . gamma') gamma along each leg.
TangentVector transport_along_path_numeric(const GeodesicLegPath& path, const TangentVector& v,
                                           std::size_t steps_per_leg = 2000);

// Spherical excess of the triangle P, Q, R.
double spherical_triangle_area(const Vec3& p, const Vec3& q, const Vec3& r);

struct HolonomyResult {
  double deficit = 0.0;            // |T_{R->Q} T_{P->R} v - T_{P->Q} v|
  double deficit_numeric = 0.0;    // same, via integration
  double area = 0.0;
  double bound = 0.0;              // (4/3) K_max A with K_max = 1
  bool bound_satisfied = false;
};

// Transport v from P to Q directly and via R.
HolonomyResult holonomy_deficit(const Vec3& p, const Vec3& q, const Vec3& r, const Vec3& v,
                                std::size_t steps_per_leg = 2000);

struct HolonomyTrial {
  Vec3 p, q, r;
  HolonomyResult result;
};

std::vector<HolonomyTrial> holonomy_trials(std::size_t trials, std::uint64_t seed);

struct EopCheckResult {
  bool pass = false;
  double margin = 0.0;  // min over samples of min(inner products) - epsilon
  bool monotone_longitude = false;
  std::size_t skipped = 0;  // samples at x or y
};

// Evaluates g(s', v_{x,s}) > eps and g(s', v_{s,y}) > eps along a sampled curve.
EopCheckResult enhanced_eop_check(const std::vector<Vec3>& curve, const Vec3& x, const Vec3& y,
                                  double epsilon);

// Great-circle arc x -> y sampled at `samples` points, optionally displaced
// out of plane by amplitude * sin(pi t).
std::vector<Vec3> perturbed_geodesic(const Vec3& x, const Vec3& y, std::size_t samples,
                                     double amplitude, std::size_t waves = 1);

}  // namespace corrsync
