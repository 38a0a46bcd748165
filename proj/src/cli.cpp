#include "corrsync/cli.hpp"

#include "corrsync/baselines.hpp"
#include "corrsync/benchmark.hpp"
#include "corrsync/collection_io.hpp"
#include "corrsync/error.hpp"
#include "corrsync/flow_graph.hpp"
#include "corrsync/geometry_lab.hpp"
#include "corrsync/parallel.hpp"
#include "corrsync/partial_matching.hpp"
#include "corrsync/soft_correspondence.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

namespace corrsync {

namespace {

using Json = nlohmann::ordered_json;

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool quiet = false;
  bool allow_duplicates = false;
  std::string command;
  std::string config;  // resolved options of the subcommand
  std::optional<std::uint64_t> seed;

  void note(const std::string& text) const {
    if (!quiet) err << text << '\n';
  }
};

std::vector<std::string> provenance_lines(const Context& ctx) {
  std::vector<std::string> lines{fmt::format("corrsync {}", kVersion), fmt::format("command: {}", ctx.command),
                                 fmt::format("seed: {}", ctx.seed ? std::to_string(*ctx.seed) : "none")};
  std::istringstream config(ctx.config);
  for (std::string line; std::getline(config, line);) {
    if (!line.empty()) lines.push_back("config: " + line);
  }
  return lines;
}

std::string csv_header(const Context& ctx) {
  std::string out;
  for (const auto& line : provenance_lines(ctx)) out += "# " + line + "\n";
  return out;
}

Json provenance_json(const Context& ctx) {
  Json p;
  p["version"] = kVersion;
  p["command"] = ctx.command;
  p["seed"] = ctx.seed ? Json(*ctx.seed) : Json(nullptr);
  Json config = Json::array();
  std::istringstream text(ctx.config);
  for (std::string line; std::getline(text, line);) {
    if (!line.empty()) config.push_back(line);
  }
  p["config"] = std::move(config);
  return p;
}

void emit(const Context& ctx, const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    ctx.out << contents;
  } else {
    write_file_atomic(path, contents);
    ctx.note(fmt::format("wrote {}", path));
  }
}

ShapeCollection load(const Context& ctx, const std::string& manifest) {
  return load_collection(manifest, CollectionOptions{ctx.allow_duplicates});
}

std::vector<std::size_t> default_queries(const Shape& shape) {
  if (!shape.landmarks.empty()) return shape.landmarks;
  std::vector<std::size_t> all(shape.size());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
  return all;
}

// -----------------------------------------------------------------------------
// Subcommands
// -----------------------------------------------------------------------------

struct FlowArgs {
  std::string manifest, source, target, out, format;
  double lambda = 0.978;
  std::size_t max_paths = 1'000'000;
  bool strict = false;
};

void run_flow(const Context& ctx, const FlowArgs& a) {
  const auto collection = load(ctx, a.manifest);
  const std::size_t i = collection.index_of(a.source);
  const std::size_t j = collection.index_of(a.target);
  const FlowMatrix flow = directed_flow_matrix(collection.distances(), i, j, collection.beta());
  PathOptions po{a.lambda, a.max_paths, a.strict};
  const auto dist = gibbs_distribution(enumerate_paths(flow, collection.beta(), po), a.lambda);

  const bool json = a.format == "json" || (a.format.empty() && a.out.ends_with(".json"));
  if (json) {
    Json doc;
    doc["provenance"] = provenance_json(ctx);
    doc["source"] = a.source;
    doc["target"] = a.target;
    doc["lambda"] = a.lambda;
    doc["beta"] = collection.beta();
    Json edges = Json::array();
    for (std::size_t m = 0; m < flow.size(); ++m) {
      for (std::size_t n : flow.successors(m)) {
        edges.push_back({collection.shape(m).id, collection.shape(n).id, flow.weight(m, n)});
      }
    }
    doc["edges"] = std::move(edges);
    Json paths = Json::array();
    for (std::size_t k = 0; k < dist.paths.size(); ++k) {
      Json ids = Json::array();
      for (std::size_t v : dist.paths[k].vertices) ids.push_back(collection.shape(v).id);
      paths.push_back({{"shapes", std::move(ids)},
                       {"energy", dist.paths[k].energy},
                       {"weight", dist.paths[k].weight},
                       {"probability", dist.probabilities[k]}});
    }
    doc["paths"] = std::move(paths);
    emit(ctx, a.out, doc.dump(2) + "\n");
  } else {
    // Three sections: binary matrix, weighted edge list, admissible paths.
    std::string text = csv_header(ctx);
    text += "# binary flow matrix, rows = from\nshape";
    for (std::size_t n = 0; n < flow.size(); ++n) text += "," + collection.shape(n).id;
    text += "\n";
    for (std::size_t m = 0; m < flow.size(); ++m) {
      text += collection.shape(m).id;
      for (std::size_t n = 0; n < flow.size(); ++n) text += flow.edge(m, n) ? ",1" : ",0";
      text += "\n";
    }
    text += "# edges\nfrom,to,weight\n";
    for (std::size_t m = 0; m < flow.size(); ++m) {
      for (std::size_t n : flow.successors(m)) {
        text += fmt::format("{},{},{}\n", collection.shape(m).id, collection.shape(n).id,
                            format_double(flow.weight(m, n)));
      }
    }
    text += "# paths\nprobability,energy,weight,shapes\n";
    for (std::size_t k = 0; k < dist.paths.size(); ++k) {
      std::string ids;
      for (std::size_t v : dist.paths[k].vertices) ids += (ids.empty() ? "" : " ") + collection.shape(v).id;
      text += fmt::format("{},{},{},{}\n", format_double(dist.probabilities[k]), format_double(dist.paths[k].energy),
                          format_double(dist.paths[k].weight), ids);
    }
    emit(ctx, a.out, text);
  }
  ctx.note(fmt::format("{} flow edges, {} admissible paths", flow.edge_count(), dist.paths.size()));
}

struct PropagateArgs {
  std::string manifest, source, target, out, hard, hard_out;
  double lambda = 0.978;
  std::size_t max_paths = 1'000'000;
  std::size_t knn = 8;
  bool strict = false;
  std::string points = "landmarks";
};

void run_propagate(const Context& ctx, const PropagateArgs& a) {
  const auto collection = load(ctx, a.manifest);
  const std::size_t i = collection.index_of(a.source);
  const std::size_t j = collection.index_of(a.target);
  const Shape& source = collection.shape(i);
  std::vector<std::size_t> queries = default_queries(source);
  if (a.points == "all") {
    queries.resize(source.size());
    for (std::size_t v = 0; v < queries.size(); ++v) queries[v] = v;
  }
  PropagationOptions po;
  po.paths = {a.lambda, a.max_paths, a.strict};
  const auto soft = propagate_soft(collection, i, j, queries, po);

  Json doc;
  doc["provenance"] = provenance_json(ctx);
  doc["source"] = soft.source_id;
  doc["target"] = soft.target_id;
  doc["lambda"] = soft.lambda;
  doc["beta"] = soft.beta;
  doc["path_count"] = soft.path_count;
  Json rows = Json::array();
  for (const auto& row : soft.rows) {
    Json support = Json::array();
    for (const auto& [t, mass] : row.support) support.push_back({t, mass});
    rows.push_back({{"source_index", row.source_vertex}, {"support", std::move(support)}});
  }
  doc["rows"] = std::move(rows);
  emit(ctx, a.out, doc.dump(2) + "\n");

  if (!a.hard_out.empty()) {
    CorrespondenceMap hard;
    if (a.hard == "frechet") {
      const GeodesicOracle oracle(collection.shape(j), a.knn);
      hard = frechet_mean(soft, oracle, source.size());
    } else {
      hard = mle(soft, source.size(), collection.shape(j).size());
    }
    std::string text = csv_header(ctx);
    for (std::size_t v : queries) text += fmt::format("{},{}\n", v, hard.discrete[v]);
    emit(ctx, a.hard_out, text);
  }
  ctx.note(fmt::format("{} paths, {} rows", soft.path_count, soft.rows.size()));
}

struct BaselineArgs {
  std::string manifest, source, target, out, method = "mst";
  double epsilon = 0.0;
};

void run_baseline(const Context& ctx, const BaselineArgs& a) {
  const auto collection = load(ctx, a.manifest);
  const std::size_t i = collection.index_of(a.source);
  const std::size_t j = collection.index_of(a.target);
  PropagatedMap result;
  if (a.method == "direct") {
    result = {direct_propagate(collection, i, j), {i, j}};
  } else if (a.method == "mst") {
    result = mst_propagate(collection, i, j);
  } else {
    const double eps = a.epsilon > 0.0 ? a.epsilon : default_epsilon(collection.distances());
    result = shortest_path_propagate(collection, i, j, eps);
  }
  std::string route;
  for (std::size_t v : result.path) route += (route.empty() ? "" : " ") + collection.shape(v).id;
  std::string text = csv_header(ctx) + "# path: " + route + "\n" + map_to_csv(result.map);
  emit(ctx, a.out, text);
  ctx.note("path: " + route);
}

struct MatchArgs {
  std::string manifest, source, target, out, dense_out;
  double lambda = 0.978;
  double radius = 0.0;
  double delta = 0.0;
  std::size_t max_matches = 15;
  std::size_t landmarks = 15;
  std::size_t hops = 2;
  std::size_t knn = 8;
  std::size_t interpolation_k = 3;
};

double min_separation(const std::vector<std::size_t>& vertices, const GeodesicOracle& oracle) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < vertices.size(); ++a) {
    for (std::size_t b = a + 1; b < vertices.size(); ++b) best = std::min(best, oracle.distance(vertices[a], vertices[b]));
  }
  return best;
}

void run_match(const Context& ctx, const MatchArgs& a) {
  const auto collection = load(ctx, a.manifest);
  const std::size_t i = collection.index_of(a.source);
  const std::size_t j = collection.index_of(a.target);
  const Shape& si = collection.shape(i);
  const Shape& sj = collection.shape(j);
  const GeodesicOracle oi(si, a.knn);
  const GeodesicOracle oj(sj, a.knn);
  const auto li = fps_landmarks(si, std::min(a.landmarks, si.size()), 0, oi);
  const auto lj = fps_landmarks(sj, std::min(a.landmarks, sj.size()), 0, oj);

  // Default radius keeps the landmark balls disjoint.
  double radius = a.radius;
  if (radius <= 0.0) radius = 0.25 * std::min(min_separation(li.vertices, oi), min_separation(lj.vertices, oj));
  if (!std::isfinite(radius)) throw Error(ErrorCode::InvalidArgument, "need at least two landmarks per shape");
  const double delta = a.delta > 0.0 ? a.delta : radius;

  PropagationOptions po;
  po.paths.lambda = a.lambda;
  const auto soft_ij = propagate_soft(collection, i, j, li.vertices, po);
  const auto soft_ji = propagate_soft(collection, j, i, lj.vertices, po);
  const MatchList partial = gp_partial_match(soft_ij, soft_ji, li, lj, radius, oi, oj);

  MatchList seed;
  if (si.scalar_field && sj.scalar_field) {
    const auto ei = detect_extrema(si, oi, a.hops);
    const auto ej = detect_extrema(sj, oj, a.hops);
    seed = stable_curvature_match(si, sj, ei.vertices, ej.vertices, delta, oi, oj);
  }
  MatchList candidates = seed;
  candidates.entries.insert(candidates.entries.end(), partial.entries.begin(), partial.entries.end());
  const MatchList matches =
      joint_fps_refine(seed, candidates, std::max(a.max_matches, seed.matched_count()), oi, oj);

  std::string text = csv_header(ctx) + fmt::format("# radius: {}\n# delta: {}\n", format_double(radius),
                                                   format_double(delta));
  text += "source,target,provenance\n";
  auto provenance_of = [&](std::size_t s, std::size_t t) {
    for (const auto& e : seed.entries) {
      if (e.source == s && e.target == t) return "curvature";
    }
    return "partial";
  };
  for (const auto& e : matches.entries) {
    text += fmt::format("{},{},{}\n", e.source, e.target ? std::to_string(*e.target) : "",
                        e.target ? provenance_of(e.source, *e.target) : "partial");
  }
  for (const auto& e : partial.entries) {
    if (!e.target) text += fmt::format("{},,unmatched\n", e.source);
  }
  emit(ctx, a.out, text);
  if (!a.dense_out.empty()) {
    const auto dense = interpolate_dense(matches, si, sj, oi, a.interpolation_k);
    emit(ctx, a.dense_out, csv_header(ctx) + map_to_csv(dense));
  }
  ctx.note(fmt::format("{} matches ({} from curvature)", matches.matched_count(), seed.matched_count()));
}

struct BenchmarkArgs {
  std::string manifest, out, svg, normalization = "diameter";
  std::vector<std::string> methods{"direct", "mst", "shortest", "frechet", "mle"};
  std::vector<double> lambdas{0.978};
  bool to_mean = false;
  double epsilon = 0.0;
  std::size_t knn = 8;
};

void run_benchmark_command(const Context& ctx, const BenchmarkArgs& a) {
  const auto collection = load(ctx, a.manifest);
  BenchmarkOptions options;
  options.methods.clear();
  for (const auto& m : a.methods) options.methods.push_back(parse_method(m));
  options.lambdas = a.lambdas;
  options.to_mean = a.to_mean;
  options.epsilon = a.epsilon;
  options.knn = a.knn;
  options.normalization = a.normalization == "none" ? ErrorNormalization::None : ErrorNormalization::TargetDiameter;
  const auto result = run_benchmark(collection, options);
  auto header = provenance_lines(ctx);
  for (const auto& s : result.summaries) {
    header.push_back(fmt::format("mean error {}{}: {}", s.method,
                                 s.lambda ? fmt::format(" ({})", format_double(*s.lambda)) : "",
                                 format_double(s.mean_error)));
  }
  emit(ctx, a.out, curves_to_csv(result.curves, header));
  if (!a.svg.empty()) emit(ctx, a.svg, curves_to_svg(result.curves));
  ctx.note(fmt::format("{} curves over {} pairs", result.curves.size(), result.pairs.size()));
}

struct LatticeArgs {
  std::string out, mode = "eop";
  std::size_t walks = 100;
  std::size_t side = 31;
  std::size_t max_steps = 1'000'000;
  std::uint64_t seed = 7;
};

void run_lattice(const Context& ctx, const LatticeArgs& a) {
  const LatticeGraph lattice(a.side);
  LatticeWalkOptions options;
  options.mode = parse_walk_mode(a.mode);
  options.count = a.walks;
  options.seed = a.seed;
  options.max_steps = a.max_steps;
  const auto stats = lattice_walks(lattice, options);
  std::string text = csv_header(ctx);
  text += fmt::format("# reached: {}\n# discarded: {}\n# deviation band: {}\n", stats.trajectories.size(),
                      stats.discarded, format_double(stats.deviation_band));
  text += "walk_id,step,x,y\n";
  for (std::size_t w = 0; w < stats.trajectories.size(); ++w) {
    const auto& path = stats.trajectories[w];
    for (std::size_t s = 0; s < path.size(); ++s) {
      const auto p = lattice.position(path[s]);
      text += fmt::format("{},{},{},{}\n", w, s, format_double(p.x()), format_double(p.y()));
    }
  }
  emit(ctx, a.out, text);
  ctx.note(fmt::format("{} walks reached, {} discarded, deviation band {}", stats.trajectories.size(),
                       stats.discarded, stats.deviation_band));
}

struct HolonomyArgs {
  std::string out;
  std::size_t trials = 50;
  std::uint64_t seed = 3;
};

void run_holonomy(const Context& ctx, const HolonomyArgs& a) {
  const auto trials = holonomy_trials(a.trials, a.seed);
  std::string text = csv_header(ctx);
  text += "trial,deficit,deficit_numeric,area,bound,bound_satisfied\n";
  std::size_t satisfied = 0;
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto& r = trials[k].result;
    satisfied += r.bound_satisfied ? 1 : 0;
    text += fmt::format("{},{},{},{},{},{}\n", k, format_double(r.deficit), format_double(r.deficit_numeric),
                        format_double(r.area), format_double(r.bound), r.bound_satisfied ? 1 : 0);
  }
  emit(ctx, a.out, text);
  ctx.note(fmt::format("bound satisfied on {}/{} triangles", satisfied, trials.size()));
}

struct SynthArgs {
  std::string out, maps = "groundtruth";
  std::size_t shapes = 10;
  std::size_t points = 500;
  std::size_t landmarks = 15;
  double amplitude = 0.1;
  double corrupt = 0.0;
  double subset = 0.5;
  std::uint64_t seed = 1;
};

void run_synth(const Context& ctx, const SynthArgs& a) {
  SynthOptions options;
  options.landmarks = a.landmarks;
  options.maps = a.maps == "alignment" ? SynthMaps::Alignment : SynthMaps::GroundTruth;
  options.allow_duplicates = ctx.allow_duplicates;
  auto collection = synth_collection(a.shapes, a.points, a.amplitude, a.seed, options);
  Json record;
  record["provenance"] = provenance_json(ctx);
  if (a.corrupt > 0.0) {
    auto [corrupted, log] = corrupt_maps(collection, a.corrupt, a.seed, a.subset);
    collection = std::move(corrupted);
    Json pairs = Json::array();
    for (const auto& p : log.pairs) {
      pairs.push_back({{"a", collection.shape(p.a).id}, {"b", collection.shape(p.b).id}, {"moved", p.moved}});
    }
    record["corruption"] = {{"fraction", log.fraction}, {"seed", log.seed}, {"pairs", std::move(pairs)}};
  }
  const auto manifest = save_collection(collection, a.out);
  write_file_atomic(std::filesystem::path(a.out) / "provenance.json", record.dump(2) + "\n");
  ctx.note(fmt::format("wrote {}", manifest.string()));
}

struct StabilityArgs {
  std::string manifest, after, out;
  double lambda = 0.978;
  bool soft = true;
};

void run_stability(const Context& ctx, const StabilityArgs& a) {
  const auto before = load(ctx, a.manifest);
  const auto after = load(ctx, a.after);
  StabilityOptions options;
  options.propagation.paths.lambda = a.lambda;
  options.compare_soft = a.soft;
  const auto report = stability_report(before, after, options);
  auto edges = [](const std::vector<std::pair<std::string, std::string>>& list) {
    Json out = Json::array();
    for (const auto& [x, y] : list) out.push_back({x, y});
    return out;
  };
  Json doc;
  doc["provenance"] = provenance_json(ctx);
  doc["mst_before"] = edges(report.mst_before);
  doc["mst_after"] = edges(report.mst_after);
  doc["mst_removed"] = edges(report.mst_removed);
  doc["mst_added"] = edges(report.mst_added);
  doc["mst_diff"] = report.mst_diff();
  Json pairs = Json::array();
  std::size_t flow_changes = 0;
  for (const auto& p : report.pairs) {
    flow_changes += p.flow_diff;
    pairs.push_back({{"source", p.source_id},
                     {"target", p.target_id},
                     {"flow_diff", p.flow_diff},
                     {"new_vertex_edges", p.new_vertex_edges},
                     {"max_tv", p.max_tv ? Json(*p.max_tv) : Json(nullptr)},
                     {"mst_path_before", p.mst_path_before},
                     {"mst_path_after", p.mst_path_after}});
  }
  doc["pairs"] = std::move(pairs);
  emit(ctx, a.out, doc.dump(2) + "\n");
  ctx.note(fmt::format("MST diff {}, total flow diff {}", report.mst_diff(), flow_changes));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Correspondence synchronization along eyes-on-the-prize flow paths", "corrsync"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI/TOML file with default option values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = 0;
  bool quiet = false;
  bool allow_duplicates = false;
  app.add_option("--threads", threads, "Worker thread cap (0: hardware concurrency)");
  app.add_flag("--quiet", quiet, "Suppress progress messages");
  app.add_flag("--allow-duplicates", allow_duplicates, "Accept zero off-diagonal distances");

  auto positive = CLI::PositiveNumber;
  auto unit = CLI::Range(0.0, 1.0);

  FlowArgs flow;
  auto* flow_cmd = app.add_subcommand("flow", "Flow DAG and Gibbs path distribution for one pair");
  flow_cmd->add_option("--manifest", flow.manifest)->required();
  flow_cmd->add_option("--source", flow.source)->required();
  flow_cmd->add_option("--target", flow.target)->required();
  flow_cmd->add_option("--lambda", flow.lambda)->check(unit)->capture_default_str();
  flow_cmd->add_option("--max-paths", flow.max_paths)->check(positive)->capture_default_str();
  flow_cmd->add_flag("--strict", flow.strict, "Drop the direct path when its weight is below lambda");
  flow_cmd->add_option("--format", flow.format, "csv or json (default: from the --out extension, else csv)")
      ->check(CLI::IsMember({"csv", "json"}));
  flow_cmd->add_option("--out", flow.out, "Output file (default stdout)");

  PropagateArgs prop;
  auto* prop_cmd = app.add_subcommand("propagate", "Soft correspondence between two shapes");
  prop_cmd->add_option("--manifest", prop.manifest)->required();
  prop_cmd->add_option("--source", prop.source)->required();
  prop_cmd->add_option("--target", prop.target)->required();
  prop_cmd->add_option("--lambda", prop.lambda)->check(unit)->capture_default_str();
  prop_cmd->add_option("--max-paths", prop.max_paths)->check(positive)->capture_default_str();
  prop_cmd->add_flag("--strict", prop.strict);
  prop_cmd->add_option("--points", prop.points, "Query set: landmark vertices or every vertex")
      ->check(CLI::IsMember({"landmarks", "all"}))
      ->capture_default_str();
  prop_cmd->add_option("--hard", prop.hard, "Hard map extraction")
      ->check(CLI::IsMember({"mle", "frechet"}))
      ->default_val("mle");
  prop_cmd->add_option("--hard-out", prop.hard_out, "Hard map CSV");
  prop_cmd->add_option("--knn", prop.knn)->check(positive)->capture_default_str();
  prop_cmd->add_option("--out", prop.out, "Output JSON (default stdout)");

  BaselineArgs base;
  auto* base_cmd = app.add_subcommand("baseline", "Direct, MST or shortest-path propagation");
  base_cmd->add_option("--manifest", base.manifest)->required();
  base_cmd->add_option("--source", base.source)->required();
  base_cmd->add_option("--target", base.target)->required();
  base_cmd->add_option("--method", base.method)
      ->check(CLI::IsMember({"direct", "mst", "shortest"}))
      ->capture_default_str();
  base_cmd->add_option("--epsilon", base.epsilon, "Edge threshold (0: smallest connecting value)")
      ->check(CLI::NonNegativeNumber);
  base_cmd->add_option("--out", base.out, "Output map CSV (default stdout)");

  MatchArgs match;
  auto* match_cmd = app.add_subcommand("match", "Partial landmark matching between two shapes");
  match_cmd->add_option("--manifest", match.manifest)->required();
  std::vector<std::string> match_pair;
  match_cmd->add_option("--pair", match_pair, "Source and target ids, comma separated")
      ->delimiter(',')
      ->expected(2)
      ->required();
  match_cmd->add_option("--lambda", match.lambda)->check(unit)->capture_default_str();
  match_cmd->add_option("--radius", match.radius, "Ball radius R (0: quarter of the landmark separation)")
      ->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--delta", match.delta, "Curvature candidate radius (0: R)")->check(CLI::NonNegativeNumber);
  match_cmd->add_option("--max-matches", match.max_matches)->check(positive)->capture_default_str();
  match_cmd->add_option("--landmarks", match.landmarks)->check(positive)->capture_default_str();
  match_cmd->add_option("--hops", match.hops)->check(positive)->capture_default_str();
  match_cmd->add_option("--knn", match.knn)->check(positive)->capture_default_str();
  match_cmd->add_option("--interpolation-k", match.interpolation_k)->check(positive)->capture_default_str();
  match_cmd->add_option("--out", match.out, "matches.csv (default stdout)");
  match_cmd->add_option("--dense-out", match.dense_out, "Interpolated dense map CSV");

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Landmark geodesic-error curves");
  bench_cmd->add_option("--manifest", bench.manifest)->required();
  bench_cmd->add_option("--methods", bench.methods)
      ->delimiter(',')
      ->check(CLI::IsMember({"direct", "mst", "shortest", "frechet", "mle"}))
      ->capture_default_str();
  bench_cmd->add_option("--lambda", bench.lambdas)->delimiter(',')->check(unit)->capture_default_str();
  bench_cmd->add_flag("--to-mean", bench.to_mean, "Only evaluate maps into the Frechet mean shape");
  bench_cmd->add_option("--epsilon", bench.epsilon)->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--knn", bench.knn)->check(positive)->capture_default_str();
  bench_cmd->add_option("--normalization", bench.normalization)
      ->check(CLI::IsMember({"diameter", "none"}))
      ->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "curves.csv (default stdout)");
  bench_cmd->add_option("--svg", bench.svg, "Polyline plot of the curves");

  LatticeArgs lat;
  auto* lat_cmd = app.add_subcommand("lattice", "Corner-to-corner walks on a planar lattice");
  lat_cmd->add_option("--mode", lat.mode)
      ->check(CLI::IsMember({"standard", "nonbacktracking", "eop"}))
      ->capture_default_str();
  lat_cmd->add_option("--walks", lat.walks)->check(positive)->capture_default_str();
  lat_cmd->add_option("--side", lat.side)->check(CLI::Range(2, 1000))->capture_default_str();
  lat_cmd->add_option("--max-steps", lat.max_steps)->check(positive)->capture_default_str();
  lat_cmd->add_option("--seed", lat.seed)->capture_default_str();
  lat_cmd->add_option("--out", lat.out, "walks.csv (default stdout)");

  HolonomyArgs hol;
  auto* hol_cmd = app.add_subcommand("holonomy", "Transport deficits on random spherical triangles");
  hol_cmd->add_option("--trials", hol.trials)->check(positive)->capture_default_str();
  hol_cmd->add_option("--seed", hol.seed)->capture_default_str();
  hol_cmd->add_option("--out", hol.out, "holonomy.csv (default stdout)");

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Synthetic collection with ground truth");
  syn_cmd->add_option("--shapes", syn.shapes)->check(positive)->capture_default_str();
  syn_cmd->add_option("--points", syn.points)->check(CLI::Range(16, 10'000'000))->capture_default_str();
  syn_cmd->add_option("--landmarks", syn.landmarks)->check(positive)->capture_default_str();
  syn_cmd->add_option("--amplitude", syn.amplitude)->check(CLI::NonNegativeNumber)->capture_default_str();
  syn_cmd->add_option("--maps", syn.maps)->check(CLI::IsMember({"groundtruth", "alignment"}))->capture_default_str();
  syn_cmd->add_option("--corrupt", syn.corrupt, "Fraction of pairs to corrupt")->check(unit)->capture_default_str();
  syn_cmd->add_option("--subset", syn.subset, "Fraction of vertices permuted per corrupted pair")
      ->check(unit)
      ->capture_default_str();
  syn_cmd->add_option("--seed", syn.seed)->capture_default_str();
  syn_cmd->add_option("--out", syn.out, "Output directory")->required();

  StabilityArgs stab;
  auto* stab_cmd = app.add_subcommand("stability", "Compare a collection before and after a modification");
  stab_cmd->add_option("--manifest", stab.manifest, "Collection before")->required();
  stab_cmd->add_option("--after", stab.after, "Collection after")->required();
  stab_cmd->add_option("--lambda", stab.lambda)->check(unit)->capture_default_str();
  stab_cmd->add_flag("!--no-soft", stab.soft, "Skip the soft-correspondence comparison");
  stab_cmd->add_option("--out", stab.out, "report JSON (default stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }

  Context ctx{out, err, false, false, {}, {}, std::nullopt};
  ctx.quiet = quiet;
  ctx.allow_duplicates = allow_duplicates;
  set_thread_limit(threads);
  CLI::App* sub = app.get_subcommands().front();
  ctx.command = sub->get_name();
  // Output destinations are left out so identical runs produce identical bytes.
  std::istringstream resolved(sub->config_to_str(true, false));
  for (std::string line; std::getline(resolved, line);) {
    const auto key = line.substr(0, line.find('='));
    if (key == "out" || key == "svg" || key == "hard-out" || key == "dense-out") continue;
    ctx.config += line + "\n";
  }
  try {
    if (sub == flow_cmd) {
      run_flow(ctx, flow);
    } else if (sub == prop_cmd) {
      run_propagate(ctx, prop);
    } else if (sub == base_cmd) {
      run_baseline(ctx, base);
    } else if (sub == match_cmd) {
      match.source = match_pair.at(0);
      match.target = match_pair.at(1);
      run_match(ctx, match);
    } else if (sub == bench_cmd) {
      run_benchmark_command(ctx, bench);
    } else if (sub == lat_cmd) {
      ctx.seed = lat.seed;
      run_lattice(ctx, lat);
    } else if (sub == hol_cmd) {
      ctx.seed = hol.seed;
      run_holonomy(ctx, hol);
    } else if (sub == syn_cmd) {
      ctx.seed = syn.seed;
      run_synth(ctx, syn);
    } else if (sub == stab_cmd) {
      run_stability(ctx, stab);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace corrsync
