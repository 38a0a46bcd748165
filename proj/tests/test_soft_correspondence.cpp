#include "fixtures.hpp"

#include "corrsync/parallel.hpp"
#include "corrsync/soft_correspondence.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace corrsync;
using fixtures::error_code;

namespace {

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  auto p = fixtures::iota(n);
  for (std::size_t k = n; k > 1; --k) {
    std::swap(p[k - 1], p[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(k))]);
  }
  return p;
}

// n shapes of `points` vertices with independent random maps in every direction.
ShapeCollection random_collection(std::size_t n, std::size_t points, std::mt19937_64& rng, double scale) {
  const auto d = fixtures::random_euclidean(n, rng, 2, scale);
  std::vector<Shape> shapes;
  for (std::size_t k = 0; k < n; ++k) shapes.push_back(fixtures::line_shape("r" + std::to_string(k), points));
  ShapeCollection c(shapes, d);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) {
        c.set_map(CorrespondenceMap::from_discrete(c.shape(a).id, c.shape(b).id, points, random_permutation(points, rng)));
      }
    }
  }
  return c;
}

SoftCorrespondence single_row(const std::string& target, Distribution row) {
  SoftCorrespondence s;
  s.source_id = "src";
  s.target_id = target;
  s.rows.push_back({0, std::move(row)});
  return s;
}

}  // namespace

TEST_CASE("gibbs distribution") {
  std::vector<PathRecord> paths{{{0, 1}, 1.0, std::exp(-1.0)}, {{0, 2, 1}, 0.5, std::exp(-0.5)}};
  const auto dist = gibbs_distribution(paths, 0.0);
  const double z = std::exp(-1.0) + std::exp(-0.5);
  CHECK(dist.probabilities[0] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-15));
  CHECK(std::abs(dist.probabilities[0] + dist.probabilities[1] - 1.0) <= 1e-12);
  CHECK(error_code([] { gibbs_distribution({}, 0.5); }) == ErrorCode::EmptyPathSet);
}

TEST_CASE("line fixture with one swapped map") {
  const auto c = fixtures::l4_swap();
  PropagationOptions po;
  po.paths.lambda = 0.0;
  const auto soft = propagate_soft(c, 0, 3, {0, 1}, po);
  CHECK(soft.path_count == 4);
  const double z = std::exp(-9.0) + 2 * std::exp(-5.0) + std::exp(-3.0);
  const double keep = (std::exp(-9.0) + std::exp(-5.0) + std::exp(-3.0)) / z;
  const auto& row = soft.row_for(0).support;
  REQUIRE(row.size() == 2);
  CHECK(row[0].first == 0);
  CHECK(std::abs(row[0].second - keep) <= 1e-12);
  CHECK(std::abs(row[1].second - std::exp(-5.0) / z) <= 1e-12);
  CHECK(row[0].second == doctest::Approx(0.8937).epsilon(1e-4 / 0.8937));
  CHECK(row[1].second == doctest::Approx(0.1063).epsilon(1e-4 / 0.1063));
  CHECK(soft.row_for(1).support[0] == std::pair<std::size_t, double>{0, row[1].second});

  const auto hard = mle(soft, 2, 2);
  CHECK(hard.discrete == std::vector<std::size_t>{0, 1});
  CHECK(mle_vertex(row) == 0);

  CHECK(error_code([&] { soft.row_for(5); }) == ErrorCode::EmptyRow);
  CHECK(error_code([&] { propagate_soft(c, 0, 3, {7}, po); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("threshold and strict mode") {
  const auto c = fixtures::l4_swap();
  PropagationOptions po;
  po.paths.lambda = 0.02;
  const auto soft = propagate_soft(c, 0, 3, {0}, po);
  CHECK(soft.path_count == 2);  // (1,2,3,4) and the retained direct path
  po.paths.strict = true;
  po.paths.lambda = 0.5;
  CHECK(error_code([&] { propagate_soft(c, 0, 3, {0}, po); }) == ErrorCode::EmptyPathSet);
}

TEST_CASE("missing map on an admissible edge names the path") {
  std::vector<Shape> shapes;
  for (int k = 0; k < 3; ++k) shapes.push_back(fixtures::line_shape("m" + std::to_string(k), 2));
  ShapeCollection c(shapes, fixtures::line_distances({0, 1, 2}));
  c.set_map(CorrespondenceMap::from_discrete("m0", "m2", 2, {0, 1}));
  c.set_map(CorrespondenceMap::from_discrete("m0", "m1", 2, {0, 1}));
  try {
    propagate_soft(c, 0, 2, {0});
    FAIL("expected MissingMap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMap);
    CHECK(std::string(e.what()).find("m1") != std::string::npos);
  }
}

TEST_CASE("hard maps from distributions") {
  const auto line = fixtures::line_shape("t", 2);
  const auto oracle = intra_metric(line, 1);
  CHECK(frechet_vertex({{0, 0.6}, {1, 0.4}}, oracle) == 0);
  CHECK(frechet_vertex({{0, 0.4}, {1, 0.6}}, oracle) == 1);
  CHECK(frechet_vertex({{0, 0.5}, {1, 0.5}}, oracle) == 0);
  CHECK(frechet_vertex({{1, 1.0}}, oracle) == 1);
  CHECK(mle_vertex({{0, 0.5}, {1, 0.5}}) == 0);
  CHECK(mle_vertex({{1, 1.0}}) == 1);
  CHECK(error_code([] { mle_vertex({}); }) == ErrorCode::EmptyRow);

  const auto soft = single_row("t", {{0, 0.6}, {1, 0.4}});
  CHECK(frechet_mean(soft, oracle, 1).discrete == std::vector<std::size_t>{0});
  const auto wrong = single_row("other", {{0, 1.0}});
  CHECK(error_code([&] { frechet_mean(wrong, oracle, 1); }) == ErrorCode::IdMismatch);

  // Fréchet picks the middle of a spread distribution where MLE picks a tail.
  const auto five = fixtures::line_shape("t", 5);
  const auto o5 = intra_metric(five, 1);
  const Distribution spread{{0, 0.3}, {2, 0.25}, {4, 0.45}};
  CHECK(mle_vertex(spread) == 4);
  CHECK(frechet_vertex(spread, o5) == 2);
}

TEST_CASE("ball mass") {
  const auto line = fixtures::line_shape("t", 5);
  const auto oracle = intra_metric(line, 1);
  CHECK(ball_mass({{2, 1.0}}, 2, 0.0, oracle) == 1.0);
  CHECK(ball_mass({{2, 1.0}}, 2, 3.0, oracle) == 1.0);
  CHECK(ball_mass({{0, 0.7}, {4, 0.3}}, 1, 1.0, oracle) == 0.7);
  CHECK(ball_mass({{0, 0.7}, {4, 0.3}}, 2, 0.0, oracle) == 0.0);
  CHECK(error_code([&] { ball_mass({{0, 1.0}}, 0, -1.0, oracle); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("propagation equals brute-force enumeration with explicit pushforward") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const std::size_t points = 6;
    const auto c = random_collection(n, points, rng, 0.8);
    const std::size_t i = trial % n;
    const std::size_t j = (i + 1 + trial % (n - 1)) % n;
    const double lambda = (trial % 3) * 0.3;
    PropagationOptions po;
    po.paths.lambda = lambda;
    const auto soft = propagate_soft(c, i, j, fixtures::iota(points), po);

    const auto paths = brute_force_paths(c.distances(), c.weights(), i, j, po.paths);
    double z = 0.0;
    for (const auto& p : paths) z += p.weight;
    CHECK(soft.path_count == paths.size());
    for (std::size_t v = 0; v < points; ++v) {
      std::map<std::size_t, double> expected;
      for (const auto& p : paths) {
        std::size_t image = v;
        for (std::size_t k = 0; k + 1 < p.vertices.size(); ++k) {
          image = c.map(p.vertices[k], p.vertices[k + 1]).discrete[image];
        }
        expected[image] += p.weight / z;
      }
      const auto& row = soft.row_for(v).support;
      REQUIRE(row.size() == expected.size());
      double total = 0.0;
      for (const auto& [t, mass] : row) {
        REQUIRE(expected.contains(t));
        CHECK(std::abs(mass - expected[t]) <= 1e-12);
        total += mass;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("consistent collections collapse to deltas") {
  std::mt19937_64 rng(5);
  const auto d = fixtures::random_euclidean(6, rng, 3);
  const auto c = fixtures::identity_collection(d, 4);
  std::vector<GeodesicOracle> oracles;
  for (const auto& s : c.shapes()) oracles.push_back(intra_metric(s, 1));
  const auto table = all_pairs_soft(c, landmark_queries(c), {}, &oracles);
  CHECK(table.size() == 30);
  for (const auto& r : table) {
    for (const auto& row : r.soft.rows) {
      CHECK(row.support == Distribution{{row.source_vertex, 1.0}});
    }
    CHECK(r.mle.discrete == fixtures::iota(4));
    REQUIRE(r.frechet);
    CHECK(r.frechet->discrete == fixtures::iota(4));
  }
}

TEST_CASE("two shapes use only the direct path") {
  const auto c = fixtures::l4_swap();
  std::vector<Shape> shapes{c.shape(1), c.shape(3)};
  ShapeCollection two(shapes, fixtures::line_distances({0, 2}));
  two.set_map(c.map(1, 3));
  two.set_map(c.map(3, 1));
  const auto table = all_pairs_soft(two, {{0, 1}, {0, 1}});
  REQUIRE(table.size() == 2);
  for (const auto& r : table) {
    CHECK(r.soft.path_count == 1);
    CHECK(r.mle.discrete == std::vector<std::size_t>{1, 0});
    CHECK_FALSE(r.frechet);
  }
}

TEST_CASE("all pairs reproduces per-pair results and tags errors") {
  const auto c = fixtures::l4_swap();
  PropagationOptions po;
  po.paths.lambda = 0.0;
  const auto table = all_pairs_soft(c, {{0, 1}, {0, 1}, {0, 1}, {0, 1}}, po);
  REQUIRE(table.size() == 12);
  for (const auto& r : table) {
    const auto direct = propagate_soft(c, r.source, r.target, {0, 1}, po);
    CHECK(r.soft.rows == direct.rows);
  }

  std::vector<Shape> shapes{fixtures::line_shape("a", 2), fixtures::line_shape("b", 2)};
  ShapeCollection bare(shapes, fixtures::line_distances({0, 1}));
  try {
    all_pairs_soft(bare, {{0}, {0}});
    FAIL("expected MissingMap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMap);
    CHECK(std::string(e.what()).find("pair (0,1)") != std::string::npos);
  }
}

TEST_CASE("results do not depend on the thread count") {
  std::mt19937_64 rng(12);
  const auto c = random_collection(7, 8, rng, 0.5);
  std::vector<std::vector<std::size_t>> queries(7, fixtures::iota(8));
  set_thread_limit(1);
  const auto serial = all_pairs_soft(c, queries);
  set_thread_limit(4);
  const auto parallel = all_pairs_soft(c, queries);
  set_thread_limit(0);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t k = 0; k < serial.size(); ++k) {
    CHECK(serial[k].soft.rows == parallel[k].soft.rows);
    CHECK(serial[k].mle == parallel[k].mle);
  }
}

TEST_CASE("far shape changes no soft row") {
  std::mt19937_64 rng(99);
  const auto c = random_collection(6, 5, rng, 0.7);
  std::vector<Shape> shapes = c.shapes();
  shapes.push_back(fixtures::line_shape("far", 5));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(7, 7);
  d.topLeftCorner(6, 6) = c.distances();
  for (int k = 0; k < 6; ++k) d(6, k) = d(k, 6) = 50.0;
  ShapeCollection bigger(shapes, d);
  for (const auto& [key, map] : c.maps()) bigger.set_map(map);
  for (std::size_t k = 0; k < 6; ++k) {
    bigger.set_map(CorrespondenceMap::from_discrete("far", c.shape(k).id, 5, fixtures::iota(5)));
    bigger.set_map(CorrespondenceMap::from_discrete(c.shape(k).id, "far", 5, fixtures::iota(5)));
  }
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (i == j) continue;
      const auto a = propagate_soft(c, i, j, fixtures::iota(5));
      const auto b = propagate_soft(bigger, i, j, fixtures::iota(5));
      for (std::size_t r = 0; r < a.rows.size(); ++r) {
        CHECK(total_variation(a.rows[r].support, b.rows[r].support) == 0.0);
      }
    }
  }
}

TEST_CASE("total variation") {
  CHECK(total_variation({{0, 1.0}}, {{1, 1.0}}) == 1.0);
  CHECK(total_variation({{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}) == 0.0);
  CHECK(total_variation({{0, 0.75}, {1, 0.25}}, {{1, 1.0}}) == doctest::Approx(0.75));
}

TEST_CASE("identity pair") {
  const auto c = fixtures::l4_swap();
  const auto soft = propagate_soft(c, 2, 2, {0, 1});
  CHECK(soft.row_for(1).support == Distribution{{1, 1.0}});
}
