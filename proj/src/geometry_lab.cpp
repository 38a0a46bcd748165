#include "corrsync/geometry_lab.hpp"

#include "corrsync/error.hpp"
#include "corrsync/parallel.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace corrsync {

// =============================================================================
// Lattice
// =============================================================================

LatticeGraph::LatticeGraph(std::size_t side) : side_(side), neighbours_(side * side) {
  if (side < 2) throw Error(ErrorCode::InvalidArgument, "lattice needs at least 2 points per side");
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      auto& adj = neighbours_[vertex(r, c)];
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const auto rr = static_cast<long>(r) + dr;
          const auto cc = static_cast<long>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<long>(side) || cc >= static_cast<long>(side)) continue;
          adj.push_back(vertex(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc)));
        }
      }
      std::sort(adj.begin(), adj.end());
    }
  }
}

Eigen::Vector2d LatticeGraph::position(std::size_t v) const {
  const double scale = 1.0 / static_cast<double>(side_ - 1);
  return {static_cast<double>(v % side_) * scale, static_cast<double>(v / side_) * scale};
}

Eigen::MatrixXd LatticeGraph::euclidean() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      d(a, b) = (position(static_cast<std::size_t>(a)) - position(static_cast<std::size_t>(b))).norm();
    }
  }
  return d;
}

WalkMode parse_walk_mode(const std::string& text) {
  if (text == "standard") return WalkMode::Standard;
  if (text == "nonbacktracking") return WalkMode::NonBacktracking;
  if (text == "eop") return WalkMode::EyesOnPrize;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown walk mode '{}'", text));
}

std::string to_string(WalkMode mode) {
  switch (mode) {
    case WalkMode::Standard: return "standard";
    case WalkMode::NonBacktracking: return "nonbacktracking";
    case WalkMode::EyesOnPrize: return "eop";
  }
  return "unknown";
}

std::uint64_t walk_seed(std::uint64_t master, std::uint64_t walk, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(walk), static_cast<std::uint32_t>(walk >> 32),
                    static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(attempt >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

namespace {

std::vector<std::size_t> uniform_walk(const LatticeGraph& lattice, std::size_t source, std::size_t target,
                                      bool backtracking, std::uint64_t seed, std::size_t max_steps) {
  std::mt19937_64 engine(seed);
  std::vector<std::size_t> path{source};
  std::size_t previous = lattice.size();
  std::size_t current = source;
  std::vector<std::size_t> choices;
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (current == target) return path;
    choices.clear();
    for (std::size_t v : lattice.neighbours(current)) {
      if (backtracking || v != previous) choices.push_back(v);
    }
    const auto pick = static_cast<std::size_t>(unit_uniform(engine) * static_cast<double>(choices.size()));
    previous = current;
    current = choices[std::min(pick, choices.size() - 1)];
    path.push_back(current);
  }
  if (current == target) return path;
  throw Error(ErrorCode::MaxStepsExceeded,
              fmt::format("{} walk did not reach the target within {} steps",
                          backtracking ? "standard" : "nonbacktracking", max_steps));
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

LatticeWalkStats lattice_walks(const LatticeGraph& lattice, const LatticeWalkOptions& options) {
  std::size_t source = options.source;
  std::size_t target = options.target;
  if (source == 0 && target == 0) target = lattice.size() - 1;
  if (source >= lattice.size() || target >= lattice.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "lattice walk endpoint out of range");
  }
  if (source == target) throw Error(ErrorCode::InvalidArgument, "lattice walk needs source != target");

  LatticeWalkStats stats;
  stats.trajectories.resize(options.count);
  std::vector<std::size_t> discarded(options.count, 0);

  if (options.mode == WalkMode::EyesOnPrize) {
    const Eigen::MatrixXd d = lattice.euclidean();
    const FlowMatrix flow = directed_flow_matrix(d, source, target, lattice.neighbours(), d, options.beta);
    parallel_for(options.count, [&](std::size_t w) {
      for (std::size_t attempt = 0; attempt < options.max_attempts_per_walk; ++attempt) {
        WalkResult r = sample_walk(flow, walk_seed(options.seed, w, attempt), lattice.size() + 1);
        if (r.status == WalkStatus::Reached) {
          stats.trajectories[w] = std::move(r.trajectory);
          return;
        }
        ++discarded[w];
      }
      throw Error(ErrorCode::MaxStepsExceeded,
                  fmt::format("walk {} discarded {} times in a row", w, options.max_attempts_per_walk));
    });
  } else {
    const bool backtracking = options.mode == WalkMode::Standard;
    parallel_for(options.count, [&](std::size_t w) {
      stats.trajectories[w] =
          uniform_walk(lattice, source, target, backtracking, walk_seed(options.seed, w, 0), options.max_steps);
    });
  }

  const Eigen::Vector2d a = lattice.position(source);
  const Eigen::Vector2d b = lattice.position(target);
  for (std::size_t w = 0; w < options.count; ++w) {
    stats.discarded += discarded[w];
    double worst = 0.0;
    for (std::size_t v : stats.trajectories[w]) worst = std::max(worst, segment_distance(lattice.position(v), a, b));
    stats.max_deviation.push_back(worst);
    stats.deviation_band = std::max(stats.deviation_band, worst);
  }
  return stats;
}

// =============================================================================
// Parallel transport on the unit sphere
// =============================================================================

namespace {

constexpr double kUnitTolerance = 1e-12;

void check_unit(const Vec3& p) {
  if (std::abs(p.norm() - 1.0) > kUnitTolerance) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("point has norm {}, expected 1", p.norm()));
  }
}

void check_leg(const GeodesicLeg& leg) {
  check_unit(leg.from);
  check_unit(leg.to);
  if (leg.from.cross(leg.to).norm() < 1e-12 && leg.from.dot(leg.to) < 0.0) {
    throw Error(ErrorCode::Antipodal, "leg endpoints are antipodal; the geodesic is ambiguous");
  }
}

void check_path(const GeodesicLegPath& path, const TangentVector& v) {
  if (path.legs.empty()) throw Error(ErrorCode::InvalidArgument, "empty leg path");
  for (std::size_t k = 0; k < path.legs.size(); ++k) {
    check_leg(path.legs[k]);
    if (k > 0 && (path.legs[k].from - path.legs[k - 1].to).norm() > kUnitTolerance) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("leg {} does not start where leg {} ends", k, k - 1));
    }
  }
  if ((v.base - path.legs.front().from).norm() > kUnitTolerance) {
    throw Error(ErrorCode::InvalidArgument, "tangent vector is not based at the path start");
  }
  if (std::abs(v.vector.dot(v.base)) > kUnitTolerance * std::max(1.0, v.vector.norm())) {
    throw Error(ErrorCode::InvalidArgument, "vector is not tangent at its base point");
  }
}

Vec3 rotate_along_leg(const GeodesicLeg& leg, const Vec3& v) {
  const Vec3 cross = leg.from.cross(leg.to);
  const double s = cross.norm();
  if (s == 0.0) return v;
  const double angle = std::atan2(s, leg.from.dot(leg.to));
  return Eigen::AngleAxisd(angle, cross / s) * v;
}

// dV/dt = -(V . gamma'(t)) gamma(t) with gamma(t) = cos t a + sin t u.
Vec3 integrate_leg(const GeodesicLeg& leg, const Vec3& v, std::size_t steps) {
  const Vec3& a = leg.from;
  const double dot = a.dot(leg.to);
  const Vec3 perp = leg.to - dot * a;
  if (perp.norm() == 0.0) return v;
  const Vec3 u = perp.normalized();
  const double length = std::atan2(perp.norm(), dot);
  const double h = length / static_cast<double>(steps);
  auto rhs = [&](double t, const Vec3& x) -> Vec3 {
    const Vec3 gamma = std::cos(t) * a + std::sin(t) * u;
    const Vec3 velocity = -std::sin(t) * a + std::cos(t) * u;
    return -x.dot(velocity) * gamma;
  };
  Vec3 x = v;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const Vec3 k1 = rhs(t, x);
    const Vec3 k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Vec3 k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Vec3 k4 = rhs(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

GeodesicLegPath GeodesicLegPath::through(const std::vector<Vec3>& points) {
  GeodesicLegPath path;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) path.legs.push_back({points[k], points[k + 1]});
  return path;
}

TangentVector transport_along_path(const GeodesicLegPath& path, const TangentVector& v) {
  check_path(path, v);
  Vec3 x = v.vector;
  for (const auto& leg : path.legs) x = rotate_along_leg(leg, x);
  return {path.legs.back().to, x};
}

TangentVector transport_along_path_numeric(const GeodesicLegPath& path, const TangentVector& v,
                                           std::size_t steps_per_leg) {
  check_path(path, v);
  if (steps_per_leg == 0) throw Error(ErrorCode::InvalidArgument, "need at least one integration step");
  Vec3 x = v.vector;
  for (const auto& leg : path.legs) x = integrate_leg(leg, x, steps_per_leg);
  return {path.legs.back().to, x};
}

double spherical_triangle_area(const Vec3& p, const Vec3& q, const Vec3& r) {
  const double triple = std::abs(p.dot(q.cross(r)));
  const double denom = 1.0 + p.dot(q) + q.dot(r) + r.dot(p);
  return 2.0 * std::atan2(triple, denom);
}

HolonomyResult holonomy_deficit(const Vec3& p, const Vec3& q, const Vec3& r, const Vec3& v,
                                std::size_t steps_per_leg) {
  for (const auto& [a, b] : {std::pair{p, q}, std::pair{p, r}, std::pair{r, q}}) check_leg({a, b});
  const TangentVector start{p, v};
  const auto direct = GeodesicLegPath::through({p, q});
  const auto detour = GeodesicLegPath::through({p, r, q});
  HolonomyResult out;
  out.deficit = (transport_along_path(detour, start).vector - transport_along_path(direct, start).vector).norm();
  out.deficit_numeric = (transport_along_path_numeric(detour, start, steps_per_leg).vector -
                         transport_along_path_numeric(direct, start, steps_per_leg).vector)
                            .norm();
  out.area = spherical_triangle_area(p, q, r);
  constexpr double kMaxCurvature = 1.0;
  out.bound = 4.0 / 3.0 * kMaxCurvature * out.area;
  out.bound_satisfied = out.deficit <= out.bound + 1e-12;
  return out;
}

namespace {

Vec3 random_unit(std::mt19937_64& engine) {
  // Box-Muller on the portable uniform; Gaussian triples are isotropic.
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    const double u1 = 1.0 - unit_uniform(engine);
    const double u2 = unit_uniform(engine);
    g[k] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  return g.normalized();
}

}  // namespace

std::vector<HolonomyTrial> holonomy_trials(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<HolonomyTrial> out;
  while (out.size() < trials) {
    HolonomyTrial t;
    t.p = random_unit(engine);
    t.q = random_unit(engine);
    t.r = random_unit(engine);
    const Vec3 raw = random_unit(engine);
    const Vec3 tangent = raw - raw.dot(t.p) * t.p;
    // Redraw near-antipodal or near-degenerate configurations.
    if (t.p.dot(t.q) < -0.999 || t.p.dot(t.r) < -0.999 || t.r.dot(t.q) < -0.999 || tangent.norm() < 1e-3) {
      continue;
    }
    t.result = holonomy_deficit(t.p, t.q, t.r, tangent.normalized());
    out.push_back(t);
  }
  return out;
}

// =============================================================================
// Enhanced eyes-on-the-prize condition
// =============================================================================

namespace {

// Unit initial direction at s of the geodesic toward `to`; empty if s == to.
std::optional<Vec3> direction_towards(const Vec3& s, const Vec3& to) {
  const Vec3 perp = to - s.dot(to) * s;
  if (perp.norm() < 1e-9) {
    if (s.dot(to) < 0.0) throw Error(ErrorCode::Antipodal, "curve sample antipodal to an endpoint");
    return std::nullopt;
  }
  return perp.normalized();
}

}  // namespace

EopCheckResult enhanced_eop_check(const std::vector<Vec3>& curve, const Vec3& x, const Vec3& y,
                                  double epsilon) {
  if (curve.size() < 2) throw Error(ErrorCode::InvalidArgument, "curve needs at least 2 samples");
  check_unit(x);
  check_unit(y);
  for (const auto& s : curve) check_unit(s);

  EopCheckResult out;
  out.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const Vec3& s = curve[k];
    const Vec3 diff = k == 0 ? curve[1] - curve[0]
                      : k + 1 == curve.size() ? curve[k] - curve[k - 1]
                                              : curve[k + 1] - curve[k - 1];
    Vec3 tangent = diff - diff.dot(s) * s;
    if (tangent.norm() == 0.0) throw Error(ErrorCode::Degenerate, fmt::format("stationary curve at sample {}", k));
    tangent.normalize();
    const auto toward_x = direction_towards(s, x);
    const auto toward_y = direction_towards(s, y);
    if (!toward_x || !toward_y) {
      ++out.skipped;
      continue;
    }
    const double away_from_x = tangent.dot(-*toward_x);
    const double to_y = tangent.dot(*toward_y);
    out.margin = std::min(out.margin, std::min(away_from_x, to_y) - epsilon);
  }
  out.pass = out.margin > 0.0;

  const Vec3 e1 = x;
  const Vec3 e2 = (y - x.dot(y) * x).normalized();
  out.monotone_longitude = true;
  double previous = -std::numeric_limits<double>::infinity();
  for (const auto& s : curve) {
    const double longitude = std::atan2(s.dot(e2), s.dot(e1));
    if (!(longitude > previous)) out.monotone_longitude = false;
    previous = longitude;
  }
  return out;
}

std::vector<Vec3> perturbed_geodesic(const Vec3& x, const Vec3& y, std::size_t samples,
                                     double amplitude, std::size_t waves) {
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 samples");
  const Vec3 perp = y - x.dot(y) * x;
  if (perp.norm() < 1e-12) throw Error(ErrorCode::Antipodal, "x and y must span a unique geodesic");
  const Vec3 e2 = perp.normalized();
  const Vec3 normal = x.cross(e2);
  const double angle = std::atan2(perp.norm(), x.dot(y));
  std::vector<Vec3> out;
  out.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(samples - 1);
    const Vec3 base = std::cos(t * angle) * x + std::sin(t * angle) * e2;
    const double offset = amplitude * std::sin(std::numbers::pi * t * static_cast<double>(waves));
    out.push_back((base + offset * normal).normalized());
  }
  return out;
}

}  // namespace corrsync
