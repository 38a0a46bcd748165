#include "fixtures.hpp"

#include "corrsync/partial_matching.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

using namespace corrsync;
using fixtures::error_code;

namespace {

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

// Path graph 0 - 1 - ... - (n-1) with unit edges.
GeodesicOracle chain_oracle(const std::string& id, std::size_t n) {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (std::size_t v = 0; v + 1 < n; ++v) {
    adj[v].emplace_back(v + 1, 1.0);
    adj[v + 1].emplace_back(v, 1.0);
  }
  return GeodesicOracle(id, std::move(adj));
}

Shape grid_shape(const std::string& id, int side, const Point3& offset = Point3::Zero()) {
  Shape s;
  s.id = id;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) s.points.push_back(Point3(x, y, 0.0) + offset);
  }
  return s;
}

SoftCorrespondence soft(const std::string& from, const std::string& to, std::vector<SoftRow> rows) {
  SoftCorrespondence s;
  s.source_id = from;
  s.target_id = to;
  s.rows = std::move(rows);
  return s;
}

MatchList list_of(const Pairs& pairs) {
  MatchList m;
  for (const auto& [a, b] : pairs) m.entries.push_back({a, b, MatchProvenance::Partial});
  return m;
}

std::vector<Point3> random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::vector<Point3> out;
  for (std::size_t k = 0; k < n; ++k) {
    out.emplace_back(unit_uniform(rng), 2.0 * unit_uniform(rng), 3.0 * unit_uniform(rng));
  }
  return out;
}

// Every partial injective matching respecting finite costs.
void all_matchings(const Eigen::MatrixXd& pc, const Eigen::MatrixXd& rc,
                   const std::function<void(const std::vector<std::optional<std::size_t>>&)>& visit) {
  const auto np = static_cast<std::size_t>(pc.rows());
  const auto nr = static_cast<std::size_t>(pc.cols());
  std::vector<std::optional<std::size_t>> partner(np);
  std::vector<bool> used(nr, false);
  std::function<void(std::size_t)> rec = [&](std::size_t a) {
    if (a == np) {
      visit(partner);
      return;
    }
    partner[a].reset();
    rec(a + 1);
    for (std::size_t b = 0; b < nr; ++b) {
      const auto ea = static_cast<Eigen::Index>(a);
      const auto eb = static_cast<Eigen::Index>(b);
      if (used[b] || !std::isfinite(pc(ea, eb)) || !std::isfinite(rc(eb, ea))) continue;
      used[b] = true;
      partner[a] = b;
      rec(a + 1);
      partner[a].reset();
      used[b] = false;
    }
  };
  rec(0);
}

bool stable(const Eigen::MatrixXd& pc, const Eigen::MatrixXd& rc,
            const std::vector<std::optional<std::size_t>>& partner) {
  const auto np = static_cast<Eigen::Index>(pc.rows());
  const auto nr = static_cast<Eigen::Index>(pc.cols());
  std::vector<std::optional<Eigen::Index>> held(static_cast<std::size_t>(nr));
  for (Eigen::Index a = 0; a < np; ++a) {
    if (partner[a]) held[*partner[a]] = a;
  }
  for (Eigen::Index a = 0; a < np; ++a) {
    for (Eigen::Index b = 0; b < nr; ++b) {
      if (!std::isfinite(pc(a, b)) || !std::isfinite(rc(b, a))) continue;
      const bool a_wants = !partner[a] || pc(a, b) < pc(a, static_cast<Eigen::Index>(*partner[a]));
      const bool b_wants = !held[b] || rc(b, a) < rc(b, *held[b]);
      if (a_wants && b_wants) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("farthest point sampling") {
  const Shape line = fixtures::line_shape("a", 4);
  const auto oracle = chain_oracle("a", 4);
  CHECK(fps_landmarks(line, 3, 0, oracle).vertices == std::vector<std::size_t>{0, 3, 1});
  CHECK(fps_landmarks(line, 1, 2, oracle).vertices == std::vector<std::size_t>{2});
  CHECK(fps_landmarks(line, 4, 0, oracle).vertices == std::vector<std::size_t>{0, 3, 1, 2});
  CHECK(fps_landmarks(line, 0, 0, oracle).vertices.empty());
  CHECK(error_code([&] { fps_landmarks(line, 5, 0, oracle); }) == ErrorCode::InvalidArgument);
  CHECK(error_code([&] { fps_landmarks(line, 2, 4, oracle); }) == ErrorCode::IndexOutOfRange);

  // Each new landmark is a farthest vertex from those already chosen.
  const Shape grid = grid_shape("g", 7);
  const GeodesicOracle go(grid, 8);
  const auto picked = fps_landmarks(grid, 10, 0, go).vertices;
  for (std::size_t k = 1; k < picked.size(); ++k) {
    auto gap = [&](std::size_t v) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < k; ++q) m = std::min(m, go.distance(v, picked[q]));
      return m;
    };
    for (std::size_t v = 0; v < grid.size(); ++v) CHECK(gap(v) <= gap(picked[k]));
  }
}

TEST_CASE("mutual partial matching") {
  const auto o1 = chain_oracle("a", 10);
  const auto o2 = chain_oracle("b", 10);
  const LandmarkSet l1{"a", {0, 5}, LandmarkMethod::Provided};
  const LandmarkSet l2{"b", {0, 5}, LandmarkMethod::Provided};
  const auto s12 = soft("a", "b", {{0, {{0, 0.7}, {9, 0.3}}}, {5, {{5, 0.3}, {9, 0.7}}}});
  const auto s21 = soft("b", "a", {{0, {{1, 0.6}, {8, 0.4}}}, {5, {{9, 1.0}}}});

  const auto m = gp_partial_match(s12, s21, l1, l2, 1.0, o1, o2);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0] == MatchEntry{0, 0, MatchProvenance::Partial});
  CHECK(m.entries[1] == MatchEntry{5, std::nullopt, MatchProvenance::Partial});
  CHECK(m.matched_count() == 1);
  CHECK(m.pairs() == Pairs{{0, 0}});

  // Swapping the roles mirrors the matched pairs.
  const auto back = gp_partial_match(s21, s12, l2, l1, 1.0, o2, o1);
  CHECK(back.pairs() == Pairs{{0, 0}});

  // Forward mass 0.7 but reverse mass below one half: no match.
  const auto weak = soft("b", "a", {{0, {{1, 0.4}, {8, 0.6}}}, {5, {{9, 1.0}}}});
  CHECK(gp_partial_match(s12, weak, l1, l2, 1.0, o1, o2).matched_count() == 0);

  const LandmarkSet close{"a", {0, 2}, LandmarkMethod::Provided};
  CHECK(error_code([&] { gp_partial_match(s12, s21, close, l2, 1.0, o1, o2); }) == ErrorCode::BallOverlap);
  CHECK(error_code([&] { gp_partial_match(s12, s21, l1, l2, -1.0, o1, o2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("curvature extrema") {
  const std::vector<std::vector<std::size_t>> chain{{1}, {0, 2}, {1, 3}, {2}};
  CHECK(detect_extrema(chain, {1, 3, 2, 5}, 1) == std::vector<std::size_t>{1, 3});
  CHECK(detect_extrema(chain, {1, 3, 2, 5}, 2) == std::vector<std::size_t>{3});
  CHECK(detect_extrema(chain, {2, 2, 2, 2}, 1).empty());
  CHECK(detect_extrema({{}}, {4.0}, 1) == std::vector<std::size_t>{0});
  CHECK(error_code([&] { detect_extrema(chain, {1, 2}, 1); }) == ErrorCode::InvalidArgument);

  Shape s = fixtures::line_shape("a", 4);
  const auto oracle = chain_oracle("a", 4);
  CHECK(error_code([&] { detect_extrema(s, oracle, 1); }) == ErrorCode::MissingField);
  s.scalar_field = std::vector<double>{1, 3, 2, 5};
  CHECK(detect_extrema(s, oracle, 1).vertices == std::vector<std::size_t>{1, 3});
}

TEST_CASE("Gale-Shapley against brute-force stable matchings") {
  std::mt19937_64 rng(12);
  const double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index np = 1 + trial % 4;
    const Eigen::Index nr = 1 + (trial / 4) % 4;
    Eigen::MatrixXd pc(np, nr);
    Eigen::MatrixXd rc(nr, np);
    for (Eigen::Index a = 0; a < np; ++a) {
      for (Eigen::Index b = 0; b < nr; ++b) {
        const bool candidate = unit_uniform(rng) < 0.8;
        pc(a, b) = candidate ? unit_uniform(rng) : inf;
        rc(b, a) = candidate ? unit_uniform(rng) : inf;
      }
    }
    const auto gs = gale_shapley(pc, rc);
    CHECK(stable(pc, rc, gs));
    // Proposer-optimal: no stable matching gives any proposer a better partner.
    std::size_t stable_count = 0;
    all_matchings(pc, rc, [&](const std::vector<std::optional<std::size_t>>& other) {
      if (!stable(pc, rc, other)) return;
      ++stable_count;
      for (Eigen::Index a = 0; a < np; ++a) {
        if (!other[a]) continue;
        REQUIRE(gs[a].has_value());
        CHECK(pc(a, static_cast<Eigen::Index>(*gs[a])) <= pc(a, static_cast<Eigen::Index>(*other[a])));
      }
    });
    CHECK(stable_count >= 1);
  }
  // Both proposers prefer receiver 0, which prefers proposer 1.
  Eigen::MatrixXd pc(2, 2);
  pc << 0.1, 0.5, 0.2, 0.4;
  Eigen::MatrixXd rc(2, 2);
  rc << 0.3, 0.1, 0.2, 0.6;
  const auto unique = gale_shapley(pc, rc);
  CHECK(unique == std::vector<std::optional<std::size_t>>{1, 0});
  std::size_t stable_matchings = 0;
  all_matchings(pc, rc, [&](const std::vector<std::optional<std::size_t>>& m) {
    if (stable(pc, rc, m)) {
      ++stable_matchings;
      CHECK(m == unique);
    }
  });
  CHECK(stable_matchings == 1);

  CHECK(error_code([] { gale_shapley(Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 3)); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("stable curvature matching") {
  const Shape grid = grid_shape("g", 5);
  Shape twin = grid;
  twin.id = "h";
  const GeodesicOracle oi(grid, 8);
  const GeodesicOracle oj(twin, 8);
  const auto m = stable_curvature_match(grid, twin, {0, 12, 24}, {0, 12, 24}, 0.5, oi, oj);
  REQUIRE(m.entries.size() == 3);
  CHECK(m.pairs() == Pairs{{0, 0}, {12, 12}, {24, 24}});
  for (const auto& e : m.entries) CHECK(e.provenance == MatchProvenance::Curvature);
  CHECK(stable_curvature_match(grid, twin, {0, 12}, {}, 0.5, oi, oj).entries.empty());
  CHECK(stable_curvature_match(grid, twin, {0, 12}, {0, 12}, 0.0, oi, oj).entries.empty());
  // Only mutual candidates within delta survive.
  CHECK(stable_curvature_match(grid, twin, {0, 12}, {1, 12}, 0.5, oi, oj).pairs() == Pairs{{12, 12}});
}

TEST_CASE("joint farthest-point refinement") {
  const auto oi = chain_oracle("a", 10);
  const auto oj = chain_oracle("b", 10);
  // Energy of (3, 3) is 3 + 3, of (1, 1) only 1 + 1.
  const auto first = joint_fps_refine(list_of({{0, 0}}), list_of({{1, 1}, {3, 3}}), 2, chain_oracle("p", 4),
                                      chain_oracle("q", 4));
  CHECK(first.pairs() == Pairs{{0, 0}, {3, 3}});
  CHECK(joint_fps_refine(list_of({{0, 0}}), list_of({{1, 1}, {3, 3}}), 1, oi, oj).pairs() == Pairs{{0, 0}});

  const auto seed = list_of({{0, 0}});
  const auto refined = joint_fps_refine(seed, list_of({{3, 3}, {9, 9}, {5, 5}, {0, 7}}), 3, oi, oj);
  CHECK(refined.pairs() == Pairs{{0, 0}, {9, 9}, {5, 5}});
  CHECK(joint_fps_refine(seed, list_of({{5, 5}, {0, 7}, {9, 9}, {3, 3}}), 3, oi, oj).pairs() == refined.pairs());
  CHECK(joint_fps_refine(seed, list_of({{3, 3}, {9, 9}}), 10, oi, oj).pairs() == Pairs{{0, 0}, {9, 9}, {3, 3}});
  CHECK(joint_fps_refine(seed, list_of({}), 5, oi, oj).pairs() == Pairs{{0, 0}});
  CHECK(error_code([&] { joint_fps_refine(list_of({{0, 0}, {1, 1}}), list_of({}), 1, oi, oj); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("dense interpolation") {
  const Shape a = grid_shape("a", 5);
  const Shape b = grid_shape("b", 5, Point3(10.0, 0.0, 0.0));
  const GeodesicOracle oa(a, 8);

  MatchList all;
  for (std::size_t v = 0; v < a.size(); ++v) all.entries.push_back({v, v, MatchProvenance::Partial});
  CHECK(interpolate_dense(all, a, b, oa, 3).discrete == fixtures::iota(a.size()));

  const auto single = interpolate_dense(list_of({{4, 7}}), a, b, oa, 3);
  CHECK(single.discrete == std::vector<std::size_t>(a.size(), 7));

  const Pairs sparse{{0, 0}, {4, 4}, {12, 12}, {20, 20}, {24, 24}};
  const auto dense = interpolate_dense(list_of(sparse), a, b, oa, 3);
  CHECK(interpolate_dense(list_of(sparse), a, b, oa, 50) == interpolate_dense(list_of(sparse), a, b, oa, 5));
  CHECK(dense.source_id == "a");
  CHECK(dense.target_id == "b");
  for (const auto& [s, t] : sparse) CHECK(dense.discrete[s] == t);

  CHECK(error_code([&] { interpolate_dense(list_of({}), a, b, oa, 3); }) == ErrorCode::NoMatches);
  CHECK(error_code([&] { interpolate_dense(list_of({{0, 0}}), a, b, oa, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("rigid fit and iterative closest point") {
  std::mt19937_64 rng(5);
  const auto cloud = random_cloud(200, rng);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.2, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const Point3 shift(0.3, -0.1, 0.2);
  std::vector<Point3> moved;
  for (const auto& p : cloud) moved.push_back(r * p + shift);

  const auto fit = fit_rigid(cloud, moved);
  CHECK((fit.rotation - r).norm() < 1e-12);
  CHECK((fit.translation - shift).norm() < 1e-12);
  CHECK(error_code([&] { fit_rigid(cloud, {}); }) == ErrorCode::InvalidArgument);

  Shape src;
  src.id = "src";
  src.points = cloud;
  Shape dst = src;
  dst.id = "dst";
  const auto same = baseline_pairwise_align(src, dst);
  CHECK(same.distance == 0.0);
  CHECK(same.map.discrete == fixtures::iota(200));

  dst.points = moved;
  const auto aligned = baseline_pairwise_align(src, dst);
  CHECK(aligned.distance < 1e-9);
  CHECK(aligned.map.discrete == fixtures::iota(200));
  CHECK((aligned.transform.rotation - r).norm() < 1e-9);

  Shape half = dst;
  half.points.resize(150);
  const auto partial = baseline_pairwise_align(src, half);
  CHECK(partial.map.discrete.size() == 200);
  CHECK(partial.map.target_size == 150);
  CHECK(std::isfinite(partial.distance));

  CHECK(error_code([] { baseline_pairwise_align(fixtures::line_shape("l", 5), fixtures::line_shape("m", 5)); }) ==
        ErrorCode::Degenerate);
}

TEST_CASE("Frechet mean shape") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;  // squared row sums 5, 2, 5
  CHECK(frechet_mean_shape(d) == 1);
  CHECK(frechet_mean_shape(fixtures::line_distances({0, 1, 2, 3})) == 1);  // 14, 6, 6, 14
  Eigen::MatrixXd far = Eigen::MatrixXd::Constant(4, 4, 100.0);
  far.topLeftCorner(3, 3) = d;
  far(3, 3) = 0.0;
  CHECK(frechet_mean_shape(far) == 1);
  CHECK(error_code([] { frechet_mean_shape(Eigen::MatrixXd(0, 0)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("consistency through the mean shape") {
  const auto l4 = fixtures::l4_swap();
  const auto table = consistent_via_mean(l4);
  CHECK(table.mean_index == 1);
  CHECK(cycle_violations(table, 4) == 0);
  CHECK(table.maps.at({3, 0}).discrete == std::vector<std::size_t>{1, 0});
  CHECK(table.maps.at({0, 3}).discrete == std::vector<std::size_t>{1, 0});
  CHECK(table.maps.at({0, 2}).discrete == std::vector<std::size_t>{0, 1});

  // Random bijections with inverse reverse maps: the raw table has cycle
  // violations, the routed one none.
  std::mt19937_64 rng(31);
  auto c = fixtures::identity_collection(fixtures::random_euclidean(5, rng, 2), 6);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = a + 1; b < 5; ++b) {
      auto perm = fixtures::iota(6);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::size_t> inverse(6);
      for (std::size_t v = 0; v < 6; ++v) inverse[perm[v]] = v;
      c.set_map(CorrespondenceMap::from_discrete(c.shape(a).id, c.shape(b).id, 6, perm));
      c.set_map(CorrespondenceMap::from_discrete(c.shape(b).id, c.shape(a).id, 6, inverse));
    }
  }
  ConsistentTable raw;
  raw.maps = c.maps();
  CHECK(cycle_violations(raw, 5) > 0);
  CHECK(cycle_violations(consistent_via_mean(c), 5) == 0);

  CHECK(error_code([&] { consistent_via_mean(c, {}); }) == ErrorCode::MissingMap);
}
