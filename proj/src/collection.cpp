#include "corrsync/collection.hpp"

#include "corrsync/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>
#include <shared_mutex>
#include <unordered_map>

namespace corrsync {

// =============================================================================
// Shape and map validation
// =============================================================================

void Shape::validate() const {
  if (points.size() < 2) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("shape '{}' has {} points, need at least 2", id, points.size()));
  }
  const std::size_t n = points.size();
  for (std::size_t v : landmarks) {
    if (v >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("shape '{}': landmark {} out of range [0,{})", id, v, n));
    }
  }
  for (const auto& [label, v] : ground_truth) {
    if (v >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("shape '{}': ground truth '{}' -> {} out of range", id, label, v));
    }
  }
  if (scalar_field && scalar_field->size() != n) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("shape '{}': scalar field has {} values for {} points", id,
                            scalar_field->size(), n));
  }
  for (const auto& face : faces) {
    for (std::size_t v : face) {
      if (v >= n) {
        throw Error(ErrorCode::IndexOutOfRange,
                    fmt::format("shape '{}': face vertex {} out of range", id, v));
      }
    }
  }
}

Distribution CorrespondenceMap::row(std::size_t source_vertex) const {
  if (source_vertex >= source_size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                fmt::format("map {}->{}: source vertex {} out of range", source_id, target_id,
                            source_vertex));
  }
  if (kind == MapKind::Discrete) return {{discrete[source_vertex], 1.0}};
  return soft[source_vertex];
}

void CorrespondenceMap::validate() const {
  if (kind == MapKind::Discrete) {
    for (std::size_t v = 0; v < discrete.size(); ++v) {
      if (discrete[v] >= target_size) {
        throw Error(ErrorCode::IndexOutOfRange,
                    fmt::format("map {}->{}: image {} of vertex {} out of range [0,{})", source_id,
                                target_id, discrete[v], v, target_size));
      }
    }
    return;
  }
  for (std::size_t v = 0; v < soft.size(); ++v) {
    double sum = 0.0;
    std::size_t previous = 0;
    for (std::size_t k = 0; k < soft[v].size(); ++k) {
      const auto& [t, mass] = soft[v][k];
      if (t >= target_size) {
        throw Error(ErrorCode::IndexOutOfRange,
                    fmt::format("map {}->{}: soft target {} out of range", source_id, target_id, t));
      }
      if (!(mass >= 0.0)) {
        throw Error(ErrorCode::NotNormalized,
                    fmt::format("map {}->{}: negative mass in row {}", source_id, target_id, v));
      }
      if (k > 0 && t <= previous) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("map {}->{}: row {} not sorted/unique", source_id, target_id, v));
      }
      previous = t;
      sum += mass;
    }
    if (std::abs(sum - 1.0) > kSoftRowTolerance) {
      throw Error(ErrorCode::NotNormalized,
                  fmt::format("map {}->{}: row {} sums to {}", source_id, target_id, v, sum));
    }
  }
}

CorrespondenceMap CorrespondenceMap::identity(const std::string& id, std::size_t size) {
  std::vector<std::size_t> images(size);
  std::iota(images.begin(), images.end(), std::size_t{0});
  return from_discrete(id, id, size, std::move(images));
}

CorrespondenceMap CorrespondenceMap::from_discrete(std::string source_id, std::string target_id,
                                                   std::size_t target_size,
                                                   std::vector<std::size_t> images) {
  CorrespondenceMap map;
  map.source_id = std::move(source_id);
  map.target_id = std::move(target_id);
  map.target_size = target_size;
  map.kind = MapKind::Discrete;
  map.discrete = std::move(images);
  return map;
}

// =============================================================================
// Weights and composition
// =============================================================================

double edge_weight(double d, double beta) {
  if (!(d >= 0.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("negative distance {}", d));
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("beta must be > 0, got {}", beta));
  return std::exp(-beta * d * d);
}

void normalize(Distribution& row, double prune) {
  std::erase_if(row, [&](const auto& e) { return !(e.second > prune); });
  double sum = 0.0;
  for (const auto& e : row) sum += e.second;
  if (sum <= 0.0) {
    row.clear();
    return;
  }
  for (auto& e : row) e.second /= sum;
}

Distribution push_forward(const Distribution& mass, const CorrespondenceMap& map) {
  if (map.kind == MapKind::Discrete) {
    std::map<std::size_t, double> acc;
    for (const auto& [v, m] : mass) acc[map.discrete.at(v)] += m;
    return {acc.begin(), acc.end()};
  }
  std::map<std::size_t, double> acc;
  for (const auto& [v, m] : mass) {
    for (const auto& [t, w] : map.soft.at(v)) acc[t] += m * w;
  }
  Distribution out;
  out.reserve(acc.size());
  for (const auto& e : acc) {
    if (e.second > 0.0) out.push_back(e);
  }
  return out;
}

CorrespondenceMap compose_maps(const CorrespondenceMap& outer, const CorrespondenceMap& inner) {
  if (inner.target_id != outer.source_id) {
    throw Error(ErrorCode::IdMismatch,
                fmt::format("cannot compose {}->{} after {}->{}", outer.source_id, outer.target_id,
                            inner.source_id, inner.target_id));
  }
  if (inner.target_size != outer.source_size()) {
    throw Error(ErrorCode::IdMismatch,
                fmt::format("inner map targets {} vertices but outer map has {} sources",
                            inner.target_size, outer.source_size()));
  }
  CorrespondenceMap out;
  out.source_id = inner.source_id;
  out.target_id = outer.target_id;
  out.target_size = outer.target_size;
  if (inner.kind == MapKind::Discrete && outer.kind == MapKind::Discrete) {
    out.kind = MapKind::Discrete;
    out.discrete.resize(inner.discrete.size());
    for (std::size_t v = 0; v < inner.discrete.size(); ++v) {
      out.discrete[v] = outer.discrete[inner.discrete[v]];
    }
    return out;
  }
  out.kind = MapKind::Soft;
  out.soft.resize(inner.source_size());
  for (std::size_t v = 0; v < inner.source_size(); ++v) {
    out.soft[v] = push_forward(inner.row(v), outer);
    normalize(out.soft[v], kSoftPruneMass);
  }
  return out;
}

CorrespondenceMap invert(const CorrespondenceMap& bijection) {
  if (bijection.kind != MapKind::Discrete || bijection.discrete.size() != bijection.target_size) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("map {}->{} is not a discrete bijection", bijection.source_id,
                            bijection.target_id));
  }
  const std::size_t n = bijection.target_size;
  std::vector<std::size_t> inverse(n, n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t t = bijection.discrete[v];
    if (t >= n || inverse[t] != n) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("map {}->{} is not injective at vertex {}", bijection.source_id,
                              bijection.target_id, v));
    }
    inverse[t] = v;
  }
  return CorrespondenceMap::from_discrete(bijection.target_id, bijection.source_id, n,
                                          std::move(inverse));
}

// =============================================================================
// ShapeCollection
// =============================================================================

void validate_distances(const Eigen::MatrixXd& d, bool allow_duplicates) {
  if (d.rows() != d.cols()) {
    throw Error(ErrorCode::InvalidMetric, fmt::format("distance matrix is {}x{}", d.rows(), d.cols()));
  }
  const Eigen::Index n = d.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    if (d(a, a) != 0.0) {
      throw Error(ErrorCode::InvalidMetric, fmt::format("diagonal entry {} is {}", a, d(a, a)));
    }
    for (Eigen::Index b = 0; b < n; ++b) {
      if (!std::isfinite(d(a, b)) || d(a, b) < 0.0) {
        throw Error(ErrorCode::InvalidMetric,
                    fmt::format("entry ({},{}) = {} is not a finite nonnegative distance", a, b,
                                d(a, b)));
      }
      if (std::abs(d(a, b) - d(b, a)) > 1e-12) {
        throw Error(ErrorCode::MetricAsymmetry,
                    fmt::format("d({},{}) = {} but d({},{}) = {}", a, b, d(a, b), b, a, d(b, a)));
      }
      if (a != b && d(a, b) == 0.0 && !allow_duplicates) {
        throw Error(ErrorCode::DuplicateShapes,
                    fmt::format("shapes {} and {} are at distance 0 (use --allow-duplicates)", a, b));
      }
    }
  }
}

ShapeCollection::ShapeCollection(std::vector<Shape> shapes, Eigen::MatrixXd distances, double beta,
                                 CollectionOptions options)
    : shapes_(std::move(shapes)),
      distances_(std::move(distances)),
      beta_(beta),
      options_(options) {
  if (!(beta_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "beta must be positive");
  if (static_cast<std::size_t>(distances_.rows()) != shapes_.size()) {
    throw Error(ErrorCode::InvalidMetric,
                fmt::format("{} shapes but distance matrix has {} rows", shapes_.size(),
                            distances_.rows()));
  }
  std::set<std::string> ids;
  for (const auto& s : shapes_) {
    s.validate();
    if (!ids.insert(s.id).second) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate shape id '{}'", s.id));
    }
  }
  validate_distances(distances_, options_.allow_duplicates);
  const auto n = distances_.rows();
  weights_.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) weights_(a, b) = edge_weight(distances_(a, b), beta_);
  }
  identities_.reserve(shapes_.size());
  for (const auto& s : shapes_) identities_.push_back(CorrespondenceMap::identity(s.id, s.size()));
}

std::size_t ShapeCollection::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    if (shapes_[i].id == id) return i;
  }
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown shape id '{}'", id));
}

bool ShapeCollection::has_map(std::size_t source, std::size_t target) const {
  return source == target || maps_.contains({source, target});
}

const CorrespondenceMap& ShapeCollection::map(std::size_t source, std::size_t target) const {
  if (auto it = maps_.find({source, target}); it != maps_.end()) return it->second;
  if (source == target && source < identities_.size()) return identities_[source];
  throw Error(ErrorCode::MissingMap,
              fmt::format("no map from '{}' to '{}'", shapes_.at(source).id, shapes_.at(target).id));
}

void ShapeCollection::set_map(CorrespondenceMap map) {
  const std::size_t s = index_of(map.source_id);
  const std::size_t t = index_of(map.target_id);
  if (map.source_size() != shapes_[s].size() || map.target_size != shapes_[t].size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                fmt::format("map {}->{} has shape {}x{}, shapes have {} and {} points",
                            map.source_id, map.target_id, map.source_size(), map.target_size,
                            shapes_[s].size(), shapes_[t].size()));
  }
  map.validate();
  maps_.insert_or_assign({s, t}, std::move(map));
}

// =============================================================================
// GeodesicOracle
// =============================================================================

std::vector<double> dijkstra(const std::vector<std::vector<std::pair<std::size_t, double>>>& adjacency,
                             std::size_t source) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(adjacency.size(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist.at(source) = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : adjacency[u]) {
      const double nd = d + w;
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

struct GeodesicOracle::Cache {
  std::shared_mutex mutex;
  std::unordered_map<std::size_t, std::shared_ptr<const std::vector<double>>> rows;
  std::optional<double> diameter;
};

namespace {

using Adjacency = std::vector<std::vector<std::pair<std::size_t, double>>>;

Adjacency knn_adjacency(const Shape& shape, std::size_t k) {
  const std::size_t n = shape.size();
  std::vector<std::set<std::size_t>> sets(n);
  if (!shape.faces.empty()) {
    for (const auto& f : shape.faces) {
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = f[e];
        const std::size_t b = f[(e + 1) % 3];
        if (a == b) continue;
        sets[a].insert(b);
        sets[b].insert(a);
      }
    }
  } else {
    const KdTree tree(shape.points);
    for (std::size_t v = 0; v < n; ++v) {
      // k + 1 because the query point is its own nearest neighbour.
      for (std::size_t u : tree.k_nearest(shape.points[v], std::min(k + 1, n))) {
        if (u == v) continue;
        sets[v].insert(u);
        sets[u].insert(v);
      }
    }
  }
  Adjacency adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t u : sets[v]) adj[v].emplace_back(u, (shape.points[v] - shape.points[u]).norm());
  }
  return adj;
}

}  // namespace

GeodesicOracle::GeodesicOracle(const Shape& shape, std::size_t k)
    : GeodesicOracle(shape.id, [&] {
        if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
        shape.validate();
        return knn_adjacency(shape, k);
      }()) {}

GeodesicOracle::GeodesicOracle(std::string shape_id, Adjacency adjacency)
    : shape_id_(std::move(shape_id)),
      adjacency_(std::move(adjacency)),
      cache_(std::make_unique<Cache>()) {
  check_connected();
}

GeodesicOracle::GeodesicOracle(GeodesicOracle&&) noexcept = default;
GeodesicOracle& GeodesicOracle::operator=(GeodesicOracle&&) noexcept = default;
GeodesicOracle::~GeodesicOracle() = default;

void GeodesicOracle::check_connected() const {
  const std::size_t n = adjacency_.size();
  std::vector<std::size_t> component(n, n);
  std::vector<std::pair<std::size_t, std::size_t>> summary;  // (first vertex, size)
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] != n) continue;
    const std::size_t label = summary.size();
    std::size_t count = 0;
    std::vector<std::size_t> stack{start};
    component[start] = label;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      ++count;
      for (const auto& [v, w] : adjacency_[u]) {
        if (component[v] == n) {
          component[v] = label;
          stack.push_back(v);
        }
      }
    }
    summary.emplace_back(start, count);
  }
  if (summary.size() > 1) {
    std::string parts;
    for (const auto& [first, count] : summary) {
      parts += fmt::format("{}{{first vertex {}, {} vertices}}", parts.empty() ? "" : ", ", first, count);
    }
    throw Error(ErrorCode::Disconnected,
                fmt::format("neighbour graph of shape '{}' has {} components: {}", shape_id_,
                            summary.size(), parts));
  }
}

std::shared_ptr<const std::vector<double>> GeodesicOracle::row(std::size_t source) const {
  if (source >= size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                fmt::format("shape '{}': vertex {} out of range", shape_id_, source));
  }
  {
    std::shared_lock lock(cache_->mutex);
    if (auto it = cache_->rows.find(source); it != cache_->rows.end()) return it->second;
  }
  auto computed = std::make_shared<const std::vector<double>>(dijkstra(adjacency_, source));
  std::unique_lock lock(cache_->mutex);
  auto [it, inserted] = cache_->rows.emplace(source, std::move(computed));
  return it->second;
}

double GeodesicOracle::distance(std::size_t a, std::size_t b) const {
  if (a == b) {
    if (a >= size()) throw Error(ErrorCode::IndexOutOfRange, fmt::format("vertex {} out of range", a));
    return 0.0;
  }
  return (*row(std::min(a, b)))[std::max(a, b)];
}

std::vector<std::size_t> GeodesicOracle::ball(std::size_t center, double radius) const {
  const auto dist = row(center);
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < size(); ++v) {
    if (v == center || (*dist)[v] <= radius) out.push_back(v);
  }
  return out;
}

double GeodesicOracle::diameter() const {
  {
    std::shared_lock lock(cache_->mutex);
    if (cache_->diameter) return *cache_->diameter;
  }
  double best = 0.0;
  for (std::size_t v = 0; v < size(); ++v) {
    const auto dist = dijkstra(adjacency_, v);
    for (double d : dist) best = std::max(best, d);
  }
  std::unique_lock lock(cache_->mutex);
  cache_->diameter = best;
  return best;
}

GeodesicOracle intra_metric(const Shape& shape, std::size_t k) { return GeodesicOracle(shape, k); }

}  // namespace corrsync
