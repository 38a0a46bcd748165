#include "corrsync/benchmark.hpp"

#include "corrsync/baselines.hpp"
#include "corrsync/collection_io.hpp"
#include "corrsync/error.hpp"
#include "corrsync/flow_graph.hpp"
#include "corrsync/parallel.hpp"
#include "corrsync/partial_matching.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace corrsync {

// =============================================================================
// Error curves
// =============================================================================

double ErrorCurve::auc() const {
  if (thresholds.size() < 2) return fractions.empty() ? 0.0 : fractions.front();
  double area = 0.0;
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    area += 0.5 * (fractions[k] + fractions[k - 1]) * (thresholds[k] - thresholds[k - 1]);
  }
  return area / (thresholds.back() - thresholds.front());
}

std::vector<double> default_grid() {
  std::vector<double> grid(100);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = 0.5 * static_cast<double>(k) / 99.0;
  return grid;
}

std::vector<double> landmark_errors(const CorrespondenceMap& predicted, const Shape& source,
                                    const Shape& target, const GeodesicOracle& target_oracle) {
  if (predicted.kind != MapKind::Discrete) {
    throw Error(ErrorCode::InvalidArgument, "landmark errors need a discrete map");
  }
  std::vector<double> errors;
  for (const auto& [label, v] : source.ground_truth) {
    const auto it = target.ground_truth.find(label);
    if (it == target.ground_truth.end()) continue;
    if (v >= predicted.discrete.size()) {
      throw Error(ErrorCode::IndexOutOfRange, fmt::format("label '{}' outside the predicted map", label));
    }
    errors.push_back(target_oracle.distance(predicted.discrete[v], it->second));
  }
  if (errors.empty()) {
    throw Error(ErrorCode::NoSharedLabels,
                fmt::format("shapes '{}' and '{}' share no ground-truth labels", source.id, target.id));
  }
  return errors;
}

ErrorCurve error_cdf(const std::vector<double>& errors, const std::vector<double>& grid) {
  if (errors.empty()) throw Error(ErrorCode::NoSharedLabels, "no errors to summarize");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  ErrorCurve curve;
  curve.thresholds = grid;
  for (double t : grid) {
    const auto within = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    curve.fractions.push_back(static_cast<double>(within) / static_cast<double>(sorted.size()));
  }
  return curve;
}

ErrorCurve error_cdf(const CorrespondenceMap& predicted, const Shape& source, const Shape& target,
                     const GeodesicOracle& target_oracle, const std::vector<double>& grid,
                     ErrorNormalization normalization) {
  auto errors = landmark_errors(predicted, source, target, target_oracle);
  if (normalization == ErrorNormalization::TargetDiameter) {
    const double diameter = target_oracle.diameter();
    if (diameter > 0.0) {
      for (double& e : errors) e /= diameter;
    }
  }
  return error_cdf(errors, grid);
}

// =============================================================================
// Benchmark
// =============================================================================

Method parse_method(const std::string& text) {
  if (text == "direct") return Method::Direct;
  if (text == "mst") return Method::Mst;
  if (text == "shortest") return Method::Shortest;
  if (text == "frechet") return Method::Frechet;
  if (text == "mle") return Method::Mle;
  throw Error(ErrorCode::InvalidArgument, fmt::format("unknown method '{}'", text));
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Direct: return "direct";
    case Method::Mst: return "mst";
    case Method::Shortest: return "shortest";
    case Method::Frechet: return "frechet";
    case Method::Mle: return "mle";
  }
  return "unknown";
}

bool uses_lambda(Method method) { return method == Method::Frechet || method == Method::Mle; }

namespace {

struct Slot {
  Method method;
  std::optional<double> lambda;
};

std::vector<std::size_t> labelled_vertices(const Shape& shape) {
  std::vector<std::size_t> out;
  for (const auto& [label, v] : shape.ground_truth) out.push_back(v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Stored soft maps are evaluated at their most likely image.
CorrespondenceMap harden(const CorrespondenceMap& soft, const std::vector<std::size_t>& queries) {
  std::vector<std::size_t> images(soft.source_size(), 0);
  for (std::size_t v : queries) images[v] = mle_vertex(soft.row(v));
  return CorrespondenceMap::from_discrete(soft.source_id, soft.target_id, soft.target_size, std::move(images));
}

[[noreturn]] void rethrow_for_pair(const ShapeCollection& c, std::size_t s, std::size_t t) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("pair '{}' -> '{}': {}", c.shape(s).id, c.shape(t).id, e.what()));
  }
}

}  // namespace

BenchmarkResult run_benchmark(const ShapeCollection& collection, const BenchmarkOptions& options) {
  std::vector<GeodesicOracle> oracles;
  oracles.reserve(collection.size());
  for (const auto& shape : collection.shapes()) oracles.emplace_back(shape, options.knn);
  return run_benchmark(collection, options, oracles);
}

BenchmarkResult run_benchmark(const ShapeCollection& collection, const BenchmarkOptions& options,
                              const std::vector<GeodesicOracle>& oracles) {
  const std::size_t n = collection.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "benchmark needs at least two shapes");
  if (oracles.size() != n) throw Error(ErrorCode::InvalidArgument, "one oracle per shape required");
  if (options.methods.empty()) throw Error(ErrorCode::InvalidArgument, "no methods selected");
  for (double lambda : options.lambdas) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda must lie in [0, 1]");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (collection.shape(k).ground_truth.empty()) {
      throw Error(ErrorCode::NoSharedLabels, fmt::format("shape '{}' has no ground truth", collection.shape(k).id));
    }
  }

  BenchmarkResult result;
  if (options.to_mean) {
    const std::size_t mean = frechet_mean_shape(collection.distances());
    for (std::size_t i = 0; i < n; ++i) {
      if (i != mean) result.pairs.emplace_back(i, mean);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) result.pairs.emplace_back(i, j);
      }
    }
  }

  std::vector<Slot> slots;
  for (Method m : options.methods) {
    if (uses_lambda(m)) {
      for (double lambda : options.lambdas) slots.push_back({m, lambda});
    } else {
      slots.push_back({m, std::nullopt});
    }
  }

  const bool need_mst = std::ranges::any_of(slots, [](const Slot& s) { return s.method == Method::Mst; });
  const bool need_shortest =
      std::ranges::any_of(slots, [](const Slot& s) { return s.method == Method::Shortest; });
  SpanningTree tree;
  if (need_mst) tree = minimum_spanning_tree(collection.distances());
  const double epsilon = options.epsilon > 0.0 ? options.epsilon
                         : need_shortest       ? default_epsilon(collection.distances())
                                               : 0.0;

  // errors[pair][slot]: raw geodesic errors in label order.
  std::vector<std::vector<std::vector<double>>> errors(result.pairs.size(),
                                                       std::vector<std::vector<double>>(slots.size()));
  parallel_for(result.pairs.size(), [&](std::size_t p) {
    const auto [s, t] = result.pairs[p];
    try {
      const Shape& source = collection.shape(s);
      const Shape& target = collection.shape(t);
      const auto queries = labelled_vertices(source);
      std::optional<double> soft_lambda;
      SoftCorrespondence soft;
      for (std::size_t k = 0; k < slots.size(); ++k) {
        CorrespondenceMap predicted;
        switch (slots[k].method) {
          case Method::Direct: predicted = direct_propagate(collection, s, t); break;
          case Method::Mst: predicted = mst_propagate(collection, tree, s, t).map; break;
          case Method::Shortest: predicted = shortest_path_propagate(collection, s, t, epsilon).map; break;
          case Method::Frechet:
          case Method::Mle: {
            if (soft_lambda != slots[k].lambda) {
              PropagationOptions po;
              po.paths.lambda = *slots[k].lambda;
              po.paths.max_paths = options.max_paths;
              soft = propagate_soft(collection, s, t, queries, po);
              soft_lambda = slots[k].lambda;
            }
            predicted = slots[k].method == Method::Mle ? mle(soft, source.size(), target.size())
                                                       : frechet_mean(soft, oracles[t], source.size());
            break;
          }
        }
        if (predicted.kind == MapKind::Soft) predicted = harden(predicted, queries);
        errors[p][k] = landmark_errors(predicted, source, target, oracles[t]);
      }
    } catch (...) {
      rethrow_for_pair(collection, s, t);
    }
  });

  std::vector<double> diameters(n, 1.0);
  if (options.normalization == ErrorNormalization::TargetDiameter) {
    std::vector<bool> needed(n, false);
    for (const auto& [s, t] : result.pairs) needed[t] = true;
    parallel_for(n, [&](std::size_t k) {
      if (needed[k]) diameters[k] = oracles[k].diameter();
    });
  }

  for (std::size_t k = 0; k < slots.size(); ++k) {
    std::vector<double> normalized;
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < result.pairs.size(); ++p) {
      const double scale = diameters[result.pairs[p].second] > 0.0 ? diameters[result.pairs[p].second] : 1.0;
      for (double e : errors[p][k]) {
        total += e;
        ++count;
        normalized.push_back(e / scale);
      }
    }
    ErrorCurve curve = error_cdf(normalized, options.grid);
    curve.method = to_string(slots[k].method);
    curve.lambda = slots[k].lambda;
    result.curves.push_back(std::move(curve));
    result.summaries.push_back({to_string(slots[k].method), slots[k].lambda,
                                total / static_cast<double>(count), count});
  }
  return result;
}

std::string curves_to_csv(const std::vector<ErrorCurve>& curves, const std::vector<std::string>& header) {
  std::string out;
  for (const auto& line : header) out += fmt::format("# {}\n", line);
  out += "method,lambda,threshold,fraction\n";
  for (const auto& curve : curves) {
    const std::string lambda = curve.lambda ? format_double(*curve.lambda) : std::string();
    for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
      out += fmt::format("{},{},{},{}\n", curve.method, lambda, format_double(curve.thresholds[k]),
                         format_double(curve.fractions[k]));
    }
  }
  return out;
}

std::string curves_to_svg(const std::vector<ErrorCurve>& curves) {
  constexpr double width = 640.0;
  constexpr double height = 400.0;
  constexpr double margin = 50.0;
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  double max_threshold = 0.0;
  for (const auto& c : curves) {
    if (!c.thresholds.empty()) max_threshold = std::max(max_threshold, c.thresholds.back());
  }
  if (max_threshold <= 0.0) max_threshold = 1.0;
  const double plot_w = width - 2 * margin;
  const double plot_h = height - 2 * margin;

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n", width,
      height, width, height);
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += fmt::format(
      "<path d=\"M{0} {1} L{0} {2} L{3} {2}\" stroke=\"black\" fill=\"none\"/>\n", margin, margin,
      height - margin, width - margin);
  out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">geodesic error</text>\n",
                     width / 2, height - 12);
  out += fmt::format(
      "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" "
      "text-anchor=\"middle\">fraction of landmarks</text>\n",
      height / 2, height / 2);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    std::string points;
    for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
      const double x = margin + plot_w * curve.thresholds[k] / max_threshold;
      const double y = height - margin - plot_h * curve.fractions[k];
      points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", x, y);
    }
    const char* colour = palette[c % std::size(palette)];
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colour,
                       points);
    const std::string label =
        curve.lambda ? fmt::format("{} ({})", curve.method, format_double(*curve.lambda)) : curve.method;
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", width - margin - 120,
                       margin + 14 * (static_cast<double>(c) + 1), colour, label);
  }
  out += "</svg>\n";
  return out;
}

// =============================================================================
// Synthetic data
// =============================================================================

std::vector<Point3> fibonacci_sphere(std::size_t points) {
  std::vector<Point3> out(points);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < points; ++k) {
    const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(points);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(k);
    out[k] = Point3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

namespace {

Point3 random_direction(std::mt19937_64& engine) {
  // Uniform on the sphere via z ~ U[-1, 1] and a uniform azimuth.
  const double z = 2.0 * unit_uniform(engine) - 1.0;
  const double phi = 2.0 * std::numbers::pi * unit_uniform(engine);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Uniform index in [0, bound).
std::size_t uniform_index(std::mt19937_64& engine, std::size_t bound) {
  const auto k = static_cast<std::size_t>(unit_uniform(engine) * static_cast<double>(bound));
  return std::min(k, bound - 1);
}

// Fisher-Yates on the portable uniform; std::shuffle is not reproducible
// across standard libraries.
template <class T>
void seeded_shuffle(std::vector<T>& values, std::mt19937_64& engine) {
  for (std::size_t k = values.size(); k > 1; --k) std::swap(values[k - 1], values[uniform_index(engine, k)]);
}

}  // namespace

ShapeCollection synth_collection(std::size_t shapes, std::size_t points, double amplitude,
                                 std::uint64_t seed, const SynthOptions& options) {
  if (points < 16) throw Error(ErrorCode::InvalidArgument, "synthetic shapes need at least 16 points");
  if (shapes < 1) throw Error(ErrorCode::InvalidArgument, "need at least one shape");
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::InvalidArgument, "deformation amplitude must be finite and nonnegative");
  }
  if (!(options.bump_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump width must be positive");

  const auto base = fibonacci_sphere(points);
  const int width = static_cast<int>(std::to_string(shapes - 1).size());
  std::vector<Shape> out(shapes);
  for (std::size_t s = 0; s < shapes; ++s) {
    auto engine = seeded_engine(seed, s);
    std::vector<std::pair<Point3, double>> bumps;
    for (std::size_t b = 0; b < options.bumps; ++b) {
      const Point3 centre = random_direction(engine);
      bumps.emplace_back(centre, amplitude * unit_uniform(engine));
    }
    Shape& shape = out[s];
    shape.id = fmt::format("s{:0{}}", s, width);
    shape.points.reserve(points);
    const double two_w2 = 2.0 * options.bump_width * options.bump_width;
    for (const auto& p : base) {
      double radius = 1.0;
      for (const auto& [centre, height] : bumps) radius += height * std::exp(-(p - centre).squaredNorm() / two_w2);
      shape.points.push_back(radius * p);
    }
  }

  // Labels sit on farthest-point samples of the undeformed sphere.
  Shape sphere;
  sphere.id = "base";
  sphere.points = base;
  const GeodesicOracle base_oracle(sphere, options.knn);
  const auto landmarks = fps_landmarks(sphere, std::min(options.landmarks, points), 0, base_oracle).vertices;
  for (auto& shape : out) {
    shape.landmarks = landmarks;
    for (std::size_t k = 0; k < landmarks.size(); ++k) shape.ground_truth[fmt::format("L{:02}", k)] = landmarks[k];
  }

  // Rigid alignment both ways for every unordered pair.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < shapes; ++a) {
    for (std::size_t b = a + 1; b < shapes; ++b) pairs.emplace_back(a, b);
  }
  std::vector<std::pair<Alignment, Alignment>> aligned(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [a, b] = pairs[k];
    aligned[k] = {baseline_pairwise_align(out[a], out[b], options.icp_iterations),
                  baseline_pairwise_align(out[b], out[a], options.icp_iterations)};
  });

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shapes), static_cast<Eigen::Index>(shapes));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    const double value = 0.5 * (aligned[k].first.distance + aligned[k].second.distance);
    d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = value;
    d(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = value;
  }

  std::vector<std::string> ids;
  for (const auto& shape : out) ids.push_back(shape.id);
  ShapeCollection collection(std::move(out), std::move(d), options.beta,
                             CollectionOptions{options.allow_duplicates});
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    if (options.maps == SynthMaps::Alignment) {
      collection.set_map(std::move(aligned[k].first.map));
      collection.set_map(std::move(aligned[k].second.map));
    } else {
      std::vector<std::size_t> identity(points);
      for (std::size_t v = 0; v < points; ++v) identity[v] = v;
      collection.set_map(CorrespondenceMap::from_discrete(ids[a], ids[b], points, identity));
      collection.set_map(CorrespondenceMap::from_discrete(ids[b], ids[a], points, std::move(identity)));
    }
  }
  return collection;
}

std::pair<ShapeCollection, CorruptionRecord> corrupt_maps(const ShapeCollection& collection, double fraction,
                                                          std::uint64_t seed, double subset_fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "fraction must lie in [0, 1]");
  if (!(subset_fraction >= 0.0 && subset_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "subset fraction must lie in [0, 1]");
  }
  CorruptionRecord record;
  record.fraction = fraction;
  record.seed = seed;
  ShapeCollection out = collection;

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < collection.size(); ++a) {
    for (std::size_t b = a + 1; b < collection.size(); ++b) pairs.emplace_back(a, b);
  }
  auto engine = seeded_engine(seed, 0);
  seeded_shuffle(pairs, engine);
  const auto chosen = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pairs.size())));
  pairs.resize(chosen);
  std::sort(pairs.begin(), pairs.end());

  for (const auto& [a, b] : pairs) {
    const CorrespondenceMap& forward = collection.map(a, b);
    const CorrespondenceMap& backward = collection.map(b, a);
    if (forward.kind != MapKind::Discrete || backward.kind != MapKind::Discrete) {
      throw Error(ErrorCode::InvalidArgument, "corruption needs discrete maps");
    }
    const std::size_t nb = collection.shape(b).size();
    std::vector<std::size_t> vertices(nb);
    for (std::size_t v = 0; v < nb; ++v) vertices[v] = v;
    seeded_shuffle(vertices, engine);
    const auto count = std::min(
        nb, std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(subset_fraction * static_cast<double>(nb)))));
    vertices.resize(count);

    // sigma sends vertices[k] to vertices[k + 1], cyclically.
    std::vector<std::size_t> sigma(nb);
    for (std::size_t v = 0; v < nb; ++v) sigma[v] = v;
    for (std::size_t k = 0; k < count; ++k) sigma[vertices[k]] = vertices[(k + 1) % count];
    std::vector<std::size_t> sigma_inverse(nb);
    for (std::size_t v = 0; v < nb; ++v) sigma_inverse[sigma[v]] = v;

    CorrespondenceMap f = forward;
    for (auto& image : f.discrete) image = sigma[image];
    CorrespondenceMap g = backward;
    for (std::size_t v = 0; v < nb; ++v) g.discrete[v] = backward.discrete[sigma_inverse[v]];
    out.set_map(std::move(f));
    out.set_map(std::move(g));

    std::sort(vertices.begin(), vertices.end());
    record.pairs.push_back({a, b, std::move(vertices)});
  }
  return {std::move(out), std::move(record)};
}

// =============================================================================
// Stability
// =============================================================================

namespace {

std::vector<std::pair<std::string, std::string>> tree_edges(const ShapeCollection& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [a, b] : minimum_spanning_tree(c.distances()).edges) {
    auto x = c.shape(a).id;
    auto y = c.shape(b).id;
    if (y < x) std::swap(x, y);
    out.emplace_back(std::move(x), std::move(y));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> id_path(const ShapeCollection& c, const SpanningTree& tree, std::size_t a, std::size_t b) {
  std::vector<std::string> out;
  for (std::size_t v : tree.path(a, b)) out.push_back(c.shape(v).id);
  return out;
}

std::optional<std::size_t> find_id(const ShapeCollection& c, const std::string& id) {
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c.shape(k).id == id) return k;
  }
  return std::nullopt;
}

std::vector<std::size_t> query_set(const Shape& shape) {
  if (!shape.landmarks.empty()) return shape.landmarks;
  std::vector<std::size_t> all(shape.size());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
  return all;
}

}  // namespace

StabilityReport stability_report(const ShapeCollection& before, const ShapeCollection& after,
                                 const StabilityOptions& options) {
  StabilityReport report;
  report.mst_before = tree_edges(before);
  report.mst_after = tree_edges(after);
  std::set_difference(report.mst_before.begin(), report.mst_before.end(), report.mst_after.begin(),
                      report.mst_after.end(), std::back_inserter(report.mst_removed));
  std::set_difference(report.mst_after.begin(), report.mst_after.end(), report.mst_before.begin(),
                      report.mst_before.end(), std::back_inserter(report.mst_added));

  // Shared shapes: index in before, index in after.
  std::vector<std::pair<std::size_t, std::size_t>> shared;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (auto m = find_id(after, before.shape(k).id)) shared.emplace_back(k, *m);
  }

  std::vector<std::pair<std::string, std::string>> pairs = options.pairs;
  if (pairs.empty()) {
    for (const auto& [a, a2] : shared) {
      for (const auto& [b, b2] : shared) {
        if (a != b) pairs.emplace_back(before.shape(a).id, before.shape(b).id);
      }
    }
  }

  const SpanningTree tree_before = minimum_spanning_tree(before.distances());
  const SpanningTree tree_after = minimum_spanning_tree(after.distances());
  report.pairs.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto& [sid, tid] = pairs[p];
    const auto s = find_id(before, sid);
    const auto t = find_id(before, tid);
    const auto s2 = find_id(after, sid);
    const auto t2 = find_id(after, tid);
    if (!s || !t || !s2 || !t2) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("pair '{}' -> '{}' is not present in both collections", sid, tid));
    }
    PairStability& out = report.pairs[p];
    out.source_id = sid;
    out.target_id = tid;
    out.mst_path_before = id_path(before, tree_before, *s, *t);
    out.mst_path_after = id_path(after, tree_after, *s2, *t2);

    const double beta = before.beta();
    const FlowMatrix f1 = directed_flow_matrix(before.distances(), *s, *t, beta);
    const FlowMatrix f2 = directed_flow_matrix(after.distances(), *s2, *t2, after.beta());
    std::vector<bool> shared_before(before.size(), false);
    std::vector<bool> shared_after(after.size(), false);
    for (const auto& [a, a2] : shared) {
      shared_before[a] = true;
      shared_after[a2] = true;
      for (const auto& [b, b2] : shared) {
        if (f1.edge(a, b) != f2.edge(a2, b2)) ++out.flow_diff;
      }
    }
    for (std::size_t m = 0; m < before.size(); ++m) {
      for (std::size_t n = 0; n < before.size(); ++n) {
        if ((!shared_before[m] || !shared_before[n]) && f1.edge(m, n)) ++out.new_vertex_edges;
      }
    }
    for (std::size_t m = 0; m < after.size(); ++m) {
      for (std::size_t n = 0; n < after.size(); ++n) {
        if ((!shared_after[m] || !shared_after[n]) && f2.edge(m, n)) ++out.new_vertex_edges;
      }
    }

    if (options.compare_soft) {
      try {
        const auto queries = query_set(before.shape(*s));
        const auto soft1 = propagate_soft(before, *s, *t, queries, options.propagation);
        const auto soft2 = propagate_soft(after, *s2, *t2, queries, options.propagation);
        double worst = 0.0;
        for (std::size_t r = 0; r < soft1.rows.size(); ++r) {
          worst = std::max(worst, total_variation(soft1.rows[r].support, soft2.rows[r].support));
        }
        out.max_tv = worst;
      } catch (...) {
        rethrow_for_pair(before, *s, *t);
      }
    }
  });
  return report;
}

}  // namespace corrsync
