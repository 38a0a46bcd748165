#pragma once

// Shapes, pairwise distances, correspondence maps and intra-shape geodesics.

#include "corrsync/spatial.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace corrsync {

// Sparse probability row: (target vertex, mass), sorted by vertex, masses > 0.
using Distribution = std::vector<std::pair<std::size_t, double>>;

// Mass below this is dropped when soft maps are composed.
inline constexpr double kSoftPruneMass = 1e-12;
// Tolerance on row sums of loaded soft maps.
inline constexpr double kSoftRowTolerance = 1e-9;

struct Shape {
  std::string id;
  std::vector<Point3> points;
  std::vector<std::size_t> landmarks;
  std::map<std::string, std::size_t> ground_truth;
  std::optional<std::vector<double>> scalar_field;
  // Optional triangle list; when present its edges replace the k-NN graph.
  std::vector<std::array<std::size_t, 3>> faces;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

enum class MapKind { Discrete, Soft };

// Map from the vertices of `source_id` to the vertices of `target_id`.
struct CorrespondenceMap {
  std::string source_id;
  std::string target_id;
  std::size_t target_size = 0;
  MapKind kind = MapKind::Discrete;
  std::vector<std::size_t> discrete;
  std::vector<Distribution> soft;

  std::size_t source_size() const {
    return kind == MapKind::Discrete ? discrete.size() : soft.size();
  }
  // Image distribution of one source vertex; a delta for discrete maps.
  Distribution row(std::size_t source_vertex) const;
  void validate() const;

  static CorrespondenceMap identity(const std::string& id, std::size_t size);
  static CorrespondenceMap from_discrete(std::string source_id, std::string target_id,
                                         std::size_t target_size, std::vector<std::size_t> images);

  friend bool operator==(const CorrespondenceMap&, const CorrespondenceMap&) = default;
};

// exp(-beta d^2). Throws InvalidArgument for negative d or non-positive beta.
double edge_weight(double d, double beta);

// outer ∘ inner. Discrete∘discrete stays discrete; anything soft is pushed
// forward row by row, pruned below kSoftPruneMass and renormalized.
CorrespondenceMap compose_maps(const CorrespondenceMap& outer, const CorrespondenceMap& inner);

// Inverse of a discrete bijection. Throws InvalidArgument otherwise.
CorrespondenceMap invert(const CorrespondenceMap& bijection);

// Pushes a distribution on the source shape through a map. No pruning.
Distribution push_forward(const Distribution& mass, const CorrespondenceMap& map);

// Drops entries below `prune` and rescales to unit sum.
void normalize(Distribution& row, double prune = 0.0);

struct CollectionOptions {
  bool allow_duplicates = false;
};

class ShapeCollection {
 public:
  ShapeCollection() = default;
  ShapeCollection(std::vector<Shape> shapes, Eigen::MatrixXd distances, double beta = 1.0,
                  CollectionOptions options = {});

  std::size_t size() const { return shapes_.size(); }
  const std::vector<Shape>& shapes() const { return shapes_; }
  const Shape& shape(std::size_t i) const { return shapes_.at(i); }
  std::size_t index_of(const std::string& id) const;

  const Eigen::MatrixXd& distances() const { return distances_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double distance(std::size_t a, std::size_t b) const { return distances_(a, b); }
  double weight(std::size_t a, std::size_t b) const { return weights_(a, b); }
  double beta() const { return beta_; }
  const CollectionOptions& options() const { return options_; }

  // Maps are keyed by (source index, target index).
  bool has_map(std::size_t source, std::size_t target) const;
  // The identity is returned for source == target when no map is stored.
  const CorrespondenceMap& map(std::size_t source, std::size_t target) const;
  void set_map(CorrespondenceMap map);
  const std::map<std::pair<std::size_t, std::size_t>, CorrespondenceMap>& maps() const {
    return maps_;
  }

 private:
  std::vector<Shape> shapes_;
  Eigen::MatrixXd distances_;
  Eigen::MatrixXd weights_;
  double beta_ = 1.0;
  CollectionOptions options_;
  std::map<std::pair<std::size_t, std::size_t>, CorrespondenceMap> maps_;
  std::vector<CorrespondenceMap> identities_;
};

// Checks symmetry (1e-12), zero diagonal, nonnegativity and, unless allowed,
// strictly positive off-diagonal entries.
void validate_distances(const Eigen::MatrixXd& distances, bool allow_duplicates);

// Shortest-path distances over a symmetrized k-NN graph (or mesh edges).
// Rows are computed on demand and cached; queries are thread safe.
class GeodesicOracle {
 public:
  GeodesicOracle(const Shape& shape, std::size_t k);
  GeodesicOracle(std::string shape_id,
                 std::vector<std::vector<std::pair<std::size_t, double>>> adjacency);
  GeodesicOracle(GeodesicOracle&&) noexcept;
  GeodesicOracle& operator=(GeodesicOracle&&) noexcept;
  ~GeodesicOracle();

  const std::string& shape_id() const { return shape_id_; }
  std::size_t size() const { return adjacency_.size(); }
  const std::vector<std::pair<std::size_t, double>>& neighbors(std::size_t v) const {
    return adjacency_.at(v);
  }

  // Symmetric by construction: always read from the lower-index row.
  double distance(std::size_t a, std::size_t b) const;
  std::shared_ptr<const std::vector<double>> row(std::size_t source) const;
  // Vertices within geodesic distance R of center, ascending.
  std::vector<std::size_t> ball(std::size_t center, double radius) const;
  // Exact maximum geodesic distance (all-sources sweep, cached).
  double diameter() const;

 private:
  struct Cache;

  void check_connected() const;

  std::string shape_id_;
  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency_;
  std::unique_ptr<Cache> cache_;
};

GeodesicOracle intra_metric(const Shape& shape, std::size_t k = 8);

// Single-source shortest paths over an adjacency list.
std::vector<double> dijkstra(const std::vector<std::vector<std::pair<std::size_t, double>>>& adjacency,
                             std::size_t source);

}  // namespace corrsync
