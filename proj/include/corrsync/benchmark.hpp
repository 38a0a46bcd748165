#pragma once

// Landmark geodesic-error curves for every propagation method, synthetic
// collections with controlled corruption, and stability reports comparing a
// collection before and after a shape is added or removed.

#include "corrsync/collection.hpp"
#include "corrsync/soft_correspondence.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace corrsync {

// ----------------------------------------------------------------------------
// Error curves
// ----------------------------------------------------------------------------

struct ErrorCurve {
  std::string method;
  std::optional<double> lambda;  // set for the flow-based methods only
  std::vector<double> thresholds;
  std::vector<double> fractions;  // fraction of landmarks with error <= threshold

  // Trapezoidal area under the curve divided by the threshold span.
  double auc() const;
};

enum class ErrorNormalization { TargetDiameter, None };

// 100 evenly spaced thresholds on [0, 0.5].
std::vector<double> default_grid();

// Geodesic error on the target of every label the two shapes share, in label
// order. Throws NoSharedLabels.
std::vector<double> landmark_errors(const CorrespondenceMap& predicted, const Shape& source,
                                    const Shape& target, const GeodesicOracle& target_oracle);

ErrorCurve error_cdf(const std::vector<double>& errors, const std::vector<double>& grid);
ErrorCurve error_cdf(const CorrespondenceMap& predicted, const Shape& source, const Shape& target,
                     const GeodesicOracle& target_oracle, const std::vector<double>& grid,
                     ErrorNormalization normalization = ErrorNormalization::TargetDiameter);

// ----------------------------------------------------------------------------
// Benchmark
// ----------------------------------------------------------------------------

enum class Method { Direct, Mst, Shortest, Frechet, Mle };

Method parse_method(const std::string& text);
std::string to_string(Method method);
bool uses_lambda(Method method);

struct BenchmarkOptions {
  std::vector<Method> methods{Method::Direct, Method::Mst, Method::Shortest, Method::Frechet,
                              Method::Mle};
  std::vector<double> lambdas{0.978};
  bool to_mean = false;
  std::vector<double> grid = default_grid();
  ErrorNormalization normalization = ErrorNormalization::TargetDiameter;
  double epsilon = 0.0;  // 0: smallest threshold that keeps the graph connected
  std::size_t knn = 8;   // intra-shape geodesic graph
  std::size_t max_paths = 1'000'000;
};

struct MethodSummary {
  std::string method;
  std::optional<double> lambda;
  double mean_error = 0.0;  // unnormalized geodesic error
  std::size_t samples = 0;
};

struct BenchmarkResult {
  std::vector<ErrorCurve> curves;
  std::vector<MethodSummary> summaries;  // same order as curves
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Evaluates every method on every ordered pair (or every (i, mean) pair when
// to_mean is set) at the vertices carrying ground-truth labels.
BenchmarkResult run_benchmark(const ShapeCollection& collection, const BenchmarkOptions& options);

// Same, reusing per-shape geodesic oracles.
BenchmarkResult run_benchmark(const ShapeCollection& collection, const BenchmarkOptions& options,
                              const std::vector<GeodesicOracle>& oracles);

// "method,lambda,threshold,fraction" rows under the given header lines.
std::string curves_to_csv(const std::vector<ErrorCurve>& curves,
                          const std::vector<std::string>& header = {});
std::string curves_to_svg(const std::vector<ErrorCurve>& curves);

// ----------------------------------------------------------------------------
// Synthetic data
// ----------------------------------------------------------------------------

enum class SynthMaps { GroundTruth, Alignment };

struct SynthOptions {
  std::size_t landmarks = 15;
  std::size_t bumps = 4;
  double bump_width = 0.5;
  SynthMaps maps = SynthMaps::GroundTruth;
  std::size_t icp_iterations = 30;
  std::size_t knn = 8;
  double beta = 1.0;
  bool allow_duplicates = false;
};

// Fibonacci sphere deformed per shape by seeded radial Gaussian bumps of
// height <= amplitude. Vertex k corresponds to vertex k on every shape.
// Distances are symmetrized rigid-alignment residuals.
ShapeCollection synth_collection(std::size_t shapes, std::size_t points, double amplitude,
                                 std::uint64_t seed, const SynthOptions& options = {});

std::vector<Point3> fibonacci_sphere(std::size_t points);

struct CorruptedPair {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  std::vector<std::size_t> moved;  // vertices of b permuted by sigma, ascending
};

struct CorruptionRecord {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<CorruptedPair> pairs;
};

// For a seeded choice of unordered pairs {a, b}: f_{b<-a} := sigma ∘ f_{b<-a}
// and f_{a<-b} := f_{a<-b} ∘ sigma^{-1}, where sigma cycles a seeded subset
// of b's vertices. Inverse pairs stay inverse.
std::pair<ShapeCollection, CorruptionRecord> corrupt_maps(const ShapeCollection& collection,
                                                          double fraction, std::uint64_t seed,
                                                          double subset_fraction = 0.5);

// ----------------------------------------------------------------------------
// Stability
// ----------------------------------------------------------------------------

struct PairStability {
  std::string source_id;
  std::string target_id;
  std::size_t flow_diff = 0;        // differing edges among shapes present in both
  std::size_t new_vertex_edges = 0; // edges touching shapes present in only one
  std::optional<double> max_tv;     // over query rows
  std::vector<std::string> mst_path_before;
  std::vector<std::string> mst_path_after;
};

struct StabilityReport {
  std::vector<std::pair<std::string, std::string>> mst_before;
  std::vector<std::pair<std::string, std::string>> mst_after;
  std::vector<std::pair<std::string, std::string>> mst_removed;
  std::vector<std::pair<std::string, std::string>> mst_added;
  std::vector<PairStability> pairs;

  std::size_t mst_diff() const { return mst_removed.size() + mst_added.size(); }
};

struct StabilityOptions {
  PropagationOptions propagation;
  bool compare_soft = true;
  // Ordered (source id, target id) pairs; empty means all pairs of shared shapes.
  std::vector<std::pair<std::string, std::string>> pairs;
};

StabilityReport stability_report(const ShapeCollection& before, const ShapeCollection& after,
                                 const StabilityOptions& options = {});

}  // namespace corrsync
