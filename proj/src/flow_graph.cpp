#include "corrsync/flow_graph.hpp"

#include "corrsync/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace corrsync {

FlowMatrix::FlowMatrix(std::size_t source, std::size_t target, std::size_t size)
    : source_(source),
      target_(target),
      size_(size),
      adjacency_(size * size, 0),
      weighted_(size * size, 0.0),
      energy_(size * size, 0.0),
      successors_(size) {}

void FlowMatrix::set_edge(std::size_t m, std::size_t n, double weight, double energy) {
  const std::size_t k = m * size_ + n;
  if (adjacency_[k] == 0) {
    auto& succ = successors_[m];
    succ.insert(std::upper_bound(succ.begin(), succ.end(), n), n);
  }
  adjacency_[k] = 1;
  weighted_[k] = weight;
  energy_[k] = energy;
}

std::size_t FlowMatrix::edge_count() const {
  std::size_t count = 0;
  for (const auto& s : successors_) count += s.size();
  return count;
}

Eigen::MatrixXi FlowMatrix::binary() const {
  const auto n = static_cast<Eigen::Index>(size_);
  Eigen::MatrixXi out = Eigen::MatrixXi::Zero(n, n);
  for (std::size_t m = 0; m < size_; ++m) {
    for (std::size_t v : successors_[m]) out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(v)) = 1;
  }
  return out;
}

Eigen::MatrixXd FlowMatrix::weighted() const {
  const auto n = static_cast<Eigen::Index>(size_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t m = 0; m < size_; ++m) {
    for (std::size_t v : successors_[m]) {
      out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(v)) = weight(m, v);
    }
  }
  return out;
}

namespace {

void check_pair(const Eigen::MatrixXd& distances, std::size_t source, std::size_t target) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (source >= n || target >= n) {
    throw Error(ErrorCode::IndexOutOfRange,
                fmt::format("pair ({},{}) outside a collection of {}", source, target, n));
  }
  if (source == target) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("flow matrix needs source != target (got {})", source));
  }
}

inline bool eyes_on_prize(const Eigen::MatrixXd& d, std::size_t i, std::size_t j, std::size_t m,
                          std::size_t n) {
  const auto I = static_cast<Eigen::Index>(i);
  const auto J = static_cast<Eigen::Index>(j);
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  return d(I, M) < d(I, N) && d(J, M) > d(J, N);
}

}  // namespace

FlowMatrix directed_flow_matrix(const Eigen::MatrixXd& distances, std::size_t source,
                                std::size_t target, double beta) {
  check_pair(distances, source, target);
  const auto n = static_cast<std::size_t>(distances.rows());
  FlowMatrix flow(source, target, n);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t v = 0; v < n; ++v) {
      if (m == v || !eyes_on_prize(distances, source, target, m, v)) continue;
      const double d = distances(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(v));
      flow.set_edge(m, v, std::exp(-beta * d * d), d * d);
    }
  }
  const double direct = distances(static_cast<Eigen::Index>(source), static_cast<Eigen::Index>(target));
  flow.set_direct_energy(direct * direct);
  return flow;
}

FlowMatrix directed_flow_matrix(const Eigen::MatrixXd& distances, std::size_t source,
                                std::size_t target,
                                const std::vector<std::vector<std::size_t>>& neighbours,
                                const Eigen::MatrixXd& edge_lengths, double beta) {
  check_pair(distances, source, target);
  const auto n = static_cast<std::size_t>(distances.rows());
  if (neighbours.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "neighbour list size does not match distance matrix");
  }
  FlowMatrix flow(source, target, n);
  for (std::size_t m = 0; m < n; ++m) {
    for (std::size_t v : neighbours[m]) {
      if (m == v || !eyes_on_prize(distances, source, target, m, v)) continue;
      const double d = edge_lengths(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(v));
      flow.set_edge(m, v, std::exp(-beta * d * d), d * d);
      if (v == target && m == source) flow.set_direct_energy(d * d);
    }
  }
  return flow;
}

// =============================================================================
// Path enumeration
// =============================================================================

namespace {

void insert_direct_path(std::vector<PathRecord>& paths, const FlowMatrix& flow, double beta,
                        const PathOptions& options) {
  if (options.strict || !flow.direct_energy()) return;
  PathRecord direct{{flow.source(), flow.target()}, *flow.direct_energy(),
                    std::exp(-beta * *flow.direct_energy())};
  auto pos = std::lower_bound(paths.begin(), paths.end(), direct,
                              [](const PathRecord& a, const PathRecord& b) { return a.vertices < b.vertices; });
  if (pos != paths.end() && pos->vertices == direct.vertices) return;
  if (paths.size() >= options.max_paths) {
    throw Error(ErrorCode::TooManyPaths,
                fmt::format("more than max_paths = {} admissible paths; raise lambda or max_paths",
                            options.max_paths));
  }
  paths.insert(pos, std::move(direct));
}

}  // namespace

std::vector<PathRecord> enumerate_paths(const FlowMatrix& flow, double beta,
                                        const PathOptions& options) {
  if (!(options.lambda >= 0.0 && options.lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("lambda {} outside [0,1]", options.lambda));
  }
  std::vector<PathRecord> paths;
  const std::size_t target = flow.target();

  // Depth-first over the DAG; successors are visited in ascending order, and
  // since the target has no outgoing edges no path is a prefix of another,
  // so emission order is lexicographic.
  struct Frame {
    std::size_t vertex;
    std::size_t next_child;
    double energy;
  };
  std::vector<Frame> stack{{flow.source(), 0, 0.0}};
  std::vector<std::size_t> current{flow.source()};
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& succ = flow.successors(top.vertex);
    if (top.next_child >= succ.size()) {
      stack.pop_back();
      current.pop_back();
      continue;
    }
    const std::size_t next = succ[top.next_child++];
    const double energy = top.energy + flow.energy(top.vertex, next);
    const double weight = std::exp(-beta * energy);
    if (weight < options.lambda) continue;
    if (next == target) {
      if (paths.size() >= options.max_paths) {
        throw Error(ErrorCode::TooManyPaths,
                    fmt::format("more than max_paths = {} admissible paths; raise lambda or max_paths",
                                options.max_paths));
      }
      PathRecord record{current, energy, weight};
      record.vertices.push_back(next);
      paths.push_back(std::move(record));
      continue;
    }
    stack.push_back({next, 0, energy});
    current.push_back(next);
  }
  insert_direct_path(paths, flow, beta, options);
  return paths;
}

std::vector<PathRecord> brute_force_paths(const Eigen::MatrixXd& distances,
                                          const Eigen::MatrixXd& weights, std::size_t source,
                                          std::size_t target, const PathOptions& options,
                                          std::size_t bound) {
  check_pair(distances, source, target);
  const auto n = static_cast<std::size_t>(distances.rows());
  if (n > bound) {
    throw Error(ErrorCode::OracleBound,
                fmt::format("brute-force oracle limited to n <= {}, got {}", bound, n));
  }
  auto at = [](const Eigen::MatrixXd& m, std::size_t a, std::size_t b) {
    return m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  };
  std::vector<std::size_t> others;
  for (std::size_t v = 0; v < n; ++v) {
    if (v != source && v != target) others.push_back(v);
  }

  std::vector<PathRecord> paths;
  // Every subset of intermediates, every ordering of it.
  for (std::uint32_t mask = 0; mask < (1u << others.size()); ++mask) {
    std::vector<std::size_t> middle;
    for (std::size_t b = 0; b < others.size(); ++b) {
      if (mask & (1u << b)) middle.push_back(others[b]);
    }
    do {
      std::vector<std::size_t> path{source};
      path.insert(path.end(), middle.begin(), middle.end());
      path.push_back(target);
      bool admissible = true;
      double energy = 0.0;
      double weight = 1.0;
      for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const std::size_t m = path[k];
        const std::size_t v = path[k + 1];
        if (!(at(distances, source, m) < at(distances, source, v) &&
              at(distances, target, m) > at(distances, target, v))) {
          admissible = false;
        }
        energy += at(distances, m, v) * at(distances, m, v);
        weight *= at(weights, m, v);
      }
      const bool is_direct = path.size() == 2;
      if (is_direct && !options.strict) admissible = true;
      if (!admissible) continue;
      if (weight < options.lambda && !(is_direct && !options.strict)) continue;
      paths.push_back(PathRecord{path, energy, weight});
    } while (std::next_permutation(middle.begin(), middle.end()));
  }
  std::sort(paths.begin(), paths.end(),
            [](const PathRecord& a, const PathRecord& b) { return a.vertices < b.vertices; });
  return paths;
}

// =============================================================================
// Random walks
// =============================================================================

WalkResult sample_walk(const FlowMatrix& flow, std::uint64_t seed, std::size_t max_steps) {
  std::mt19937_64 engine(seed);
  WalkResult result;
  std::size_t current = flow.source();
  result.trajectory.push_back(current);
  for (std::size_t step = 0; step < max_steps; ++step) {
    if (current == flow.target()) {
      result.status = WalkStatus::Reached;
      return result;
    }
    const auto& succ = flow.successors(current);
    double total = 0.0;
    for (std::size_t v : succ) total += flow.weight(current, v);
    if (succ.empty() || !(total > 0.0)) {
      result.status = WalkStatus::Discarded;
      return result;
    }
    const double u = unit_uniform(engine) * total;
    double acc = 0.0;
    std::size_t chosen = succ.back();
    for (std::size_t v : succ) {
      acc += flow.weight(current, v);
      if (u < acc) {
        chosen = v;
        break;
      }
    }
    current = chosen;
    result.trajectory.push_back(current);
  }
  if (current == flow.target()) {
    result.status = WalkStatus::Reached;
    return result;
  }
  throw Error(ErrorCode::MaxStepsExceeded,
              fmt::format("walk exceeded {} steps without terminating", max_steps));
}

}  // namespace corrsync
