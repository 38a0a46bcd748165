#pragma once

// Directed "eyes on the prize" flow graphs between a source and a target
// shape, and enumeration / sampling of their weighted paths.
//
// For a pair (i, j) the edge m -> n exists iff d(i,m) < d(i,n) and
// d(j,m) > d(j,n), both strict. Every edge moves strictly away from i, so the
// graph is a DAG, and j is its only sink that can terminate a path.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace corrsync {

class FlowMatrix {
 public:
  FlowMatrix(std::size_t source, std::size_t target, std::size_t size);

  std::size_t source() const { return source_; }
  std::size_t target() const { return target_; }
  std::size_t size() const { return size_; }

  bool edge(std::size_t m, std::size_t n) const { return adjacency_[m * size_ + n] != 0; }
  // Hadamard product W ∘ F.
  double weight(std::size_t m, std::size_t n) const { return weighted_[m * size_ + n]; }
  // Squared distance of an edge (0 when absent).
  double energy(std::size_t m, std::size_t n) const { return energy_[m * size_ + n]; }
  const std::vector<std::size_t>& successors(std::size_t m) const { return successors_[m]; }

  void set_edge(std::size_t m, std::size_t n, double weight, double energy);

  // Squared source-target distance when the pair is adjacent in the
  // underlying graph (always, for complete graphs).
  std::optional<double> direct_energy() const { return direct_energy_; }
  void set_direct_energy(double energy) { direct_energy_ = energy; }
  std::size_t edge_count() const;

  Eigen::MatrixXi binary() const;
  Eigen::MatrixXd weighted() const;

 private:
  std::size_t source_;
  std::size_t target_;
  std::size_t size_;
  std::vector<std::uint8_t> adjacency_;
  std::vector<double> weighted_;
  std::vector<double> energy_;
  std::vector<std::vector<std::size_t>> successors_;
  std::optional<double> direct_energy_;
};

// Builds F_{i->j} over the complete graph on D. W is exp(-beta D∘D).
FlowMatrix directed_flow_matrix(const Eigen::MatrixXd& distances, std::size_t source,
                                std::size_t target, double beta = 1.0);

// Same condition restricted to the edges of a sparse neighbourhood graph;
// `edge_length(m, n)` supplies the edge distances used for the weights.
FlowMatrix directed_flow_matrix(const Eigen::MatrixXd& distances, std::size_t source,
                                std::size_t target,
                                const std::vector<std::vector<std::size_t>>& neighbours,
                                const Eigen::MatrixXd& edge_lengths, double beta = 1.0);

struct PathRecord {
  std::vector<std::size_t> vertices;
  double energy = 0.0;  // sum of squared edge distances
  double weight = 1.0;  // exp(-beta * energy)

  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

struct PathOptions {
  double lambda = 0.0;
  std::size_t max_paths = 1'000'000;
  // When false, the direct path (i, j) is kept even if its weight is below
  // lambda, so the support is never empty.
  bool strict = false;
};

// All i -> j paths of the flow DAG with weight >= lambda, in lexicographic
// vertex order. Partial paths are pruned as soon as their weight drops below
// lambda; edge weights never exceed 1 so pruning is exact.
std::vector<PathRecord> enumerate_paths(const FlowMatrix& flow, double beta,
                                        const PathOptions& options = {});

inline constexpr std::size_t kBruteForceBound = 9;

// Exhaustive simple-path enumeration over the complete graph, filtered by the
// flow condition evaluated directly on D and by lambda. Weights are products
// of W entries. Independent check of enumerate_paths for small n.
std::vector<PathRecord> brute_force_paths(const Eigen::MatrixXd& distances,
                                          const Eigen::MatrixXd& weights, std::size_t source,
                                          std::size_t target, const PathOptions& options = {},
                                          std::size_t bound = kBruteForceBound);

enum class WalkStatus { Reached, Discarded };

struct WalkResult {
  std::vector<std::size_t> trajectory;
  WalkStatus status = WalkStatus::Discarded;
};

// Random walk on W ∘ F: the next vertex is drawn proportionally to the
// outgoing weights. Stops at the target or at any other sink.
WalkResult sample_walk(const FlowMatrix& flow, std::uint64_t seed, std::size_t max_steps);

// Uniform double in [0, 1) from 53 random bits; portable across standard
// libraries, unlike std::uniform_real_distribution.
template <class Engine>
double unit_uniform(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

}  // namespace corrsync
