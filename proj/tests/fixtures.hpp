#pragma once

// Hand-built collections and helpers shared by the test binaries.

#include "corrsync/collection.hpp"
#include "corrsync/error.hpp"
#include "corrsync/flow_graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using corrsync::CorrespondenceMap;
using corrsync::ErrorCode;
using corrsync::Shape;
using corrsync::ShapeCollection;

template <class F>
std::optional<ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const corrsync::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// |x_a - x_b| for shapes placed on a line.
inline Eigen::MatrixXd line_distances(const std::vector<double>& xs) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) d(a, b) = std::abs(xs[a] - xs[b]);
  }
  return d;
}

// `count` collinear points with unit spacing along x.
inline Shape line_shape(const std::string& id, std::size_t count) {
  Shape s;
  s.id = id;
  for (std::size_t k = 0; k < count; ++k) s.points.emplace_back(static_cast<double>(k), 0.0, 0.0);
  return s;
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = k;
  return out;
}

// Collection of `line_shape`s with identity maps in both directions.
inline ShapeCollection identity_collection(const Eigen::MatrixXd& d, std::size_t points = 2,
                                           bool allow_duplicates = false) {
  std::vector<Shape> shapes;
  for (Eigen::Index k = 0; k < d.rows(); ++k) {
    Shape s = line_shape("s" + std::to_string(k + 1), points);
    s.landmarks = iota(points);
    for (std::size_t v = 0; v < points; ++v) s.ground_truth["g" + std::to_string(v)] = v;
    shapes.push_back(std::move(s));
  }
  ShapeCollection c(std::move(shapes), d, 1.0, corrsync::CollectionOptions{allow_duplicates});
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = 0; b < c.size(); ++b) {
      if (a != b) {
        c.set_map(CorrespondenceMap::from_discrete(c.shape(a).id, c.shape(b).id, points, iota(points)));
      }
    }
  }
  return c;
}

// Four two-point shapes at x = 0, 1, 2, 3; identity maps except shape 2 -> 4,
// which swaps the points (its reverse swaps back).
inline ShapeCollection l4_swap() {
  ShapeCollection c = identity_collection(line_distances({0, 1, 2, 3}));
  c.set_map(CorrespondenceMap::from_discrete("s2", "s4", 2, {1, 0}));
  c.set_map(CorrespondenceMap::from_discrete("s4", "s2", 2, {1, 0}));
  return c;
}

// d12 = 1, d13 = 1, d23 = 1.9.
inline Eigen::MatrixXd t3_distances() {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 1, 1, 0, 1.9, 1, 1.9, 0;
  return d;
}

// Pairwise Euclidean distances of n random points in the unit cube of `dim`.
inline Eigen::MatrixXd random_euclidean(std::size_t n, std::mt19937_64& rng, int dim = 2,
                                        double scale = 1.0) {
  std::vector<Eigen::VectorXd> pts;
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::VectorXd p(dim);
    for (int c = 0; c < dim; ++c) p[c] = scale * corrsync::unit_uniform(rng);
    pts.push_back(p);
  }
  Eigen::MatrixXd d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) d(a, b) = (pts[a] - pts[b]).norm();
  }
  return d;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("corrsync_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
