#include "fixtures.hpp"

#include "corrsync/flow_graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace corrsync;
using fixtures::error_code;

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

std::set<Edge> edges_of(const FlowMatrix& f) {
  std::set<Edge> out;
  for (std::size_t m = 0; m < f.size(); ++m) {
    for (std::size_t n = 0; n < f.size(); ++n) {
      if (f.edge(m, n)) out.emplace(m, n);
    }
  }
  return out;
}

// Kahn's algorithm; true iff every vertex gets ordered.
bool acyclic(const FlowMatrix& f) {
  std::vector<std::size_t> indegree(f.size(), 0);
  for (std::size_t m = 0; m < f.size(); ++m) {
    for (std::size_t n : f.successors(m)) ++indegree[n];
  }
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < f.size(); ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::size_t ordered = 0;
  while (!ready.empty()) {
    const std::size_t v = ready.back();
    ready.pop_back();
    ++ordered;
    for (std::size_t n : f.successors(v)) {
      if (--indegree[n] == 0) ready.push_back(n);
    }
  }
  return ordered == f.size();
}

Eigen::MatrixXd weights_of(const Eigen::MatrixXd& d, double beta = 1.0) {
  return (-beta * d.array().square()).exp().matrix();
}

// Identical vertex sequences; energies and weights within 1e-12.
bool same_paths(const std::vector<PathRecord>& a, const std::vector<PathRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].vertices != b[k].vertices) return false;
    if (std::abs(a[k].energy - b[k].energy) > 1e-12 || std::abs(a[k].weight - b[k].weight) > 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("flow matrix on the line fixture") {
  const auto d = fixtures::line_distances({0, 1, 2, 3});
  const auto f = directed_flow_matrix(d, 0, 3);
  CHECK(edges_of(f) == std::set<Edge>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(f.weight(0, 3) == std::exp(-9.0));
  CHECK(f.energy(0, 2) == 4.0);
  CHECK(f.weight(1, 0) == 0.0);
  CHECK(f.direct_energy() == 9.0);
  CHECK(f.edge_count() == 6);
  CHECK(f.binary().sum() == 6);
  CHECK(f.weighted()(1, 2) == std::exp(-1.0));
}

TEST_CASE("flow matrix on the triangle fixture") {
  const auto f = directed_flow_matrix(fixtures::t3_distances(), 0, 2);
  CHECK(edges_of(f) == std::set<Edge>{{0, 2}});
  CHECK(error_code([] { directed_flow_matrix(fixtures::t3_distances(), 1, 1); }) == ErrorCode::InvalidArgument);
  CHECK(error_code([] { directed_flow_matrix(fixtures::t3_distances(), 0, 5); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("structural invariants on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = fixtures::random_euclidean(20, rng, 2 + trial % 3);
    const std::size_t i = trial % 20;
    const std::size_t j = (i + 1 + trial % 19) % 20;
    const auto f = directed_flow_matrix(d, i, j);
    const auto g = directed_flow_matrix(d, j, i);
    CHECK(acyclic(f));
    CHECK(f.edge(i, j));
    CHECK(f.binary().transpose() == g.binary());
    for (std::size_t m = 0; m < 20; ++m) {
      CHECK_FALSE(f.edge(m, m));
      for (std::size_t n = 0; n < 20; ++n) {
        CHECK_FALSE((f.edge(m, n) && f.edge(n, m)));
        const bool expected = d(i, m) < d(i, n) && d(j, m) > d(j, n);
        CHECK(f.edge(m, n) == expected);
      }
    }
  }
}

TEST_CASE("path enumeration on the line fixture") {
  const auto d = fixtures::line_distances({0, 1, 2, 3});
  const auto f = directed_flow_matrix(d, 0, 3);
  const auto paths = enumerate_paths(f, 1.0);
  REQUIRE(paths.size() == 4);
  CHECK(paths[0].vertices == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(paths[1].vertices == std::vector<std::size_t>{0, 1, 3});
  CHECK(paths[2].vertices == std::vector<std::size_t>{0, 2, 3});
  CHECK(paths[3].vertices == std::vector<std::size_t>{0, 3});
  const double energies[] = {3, 5, 5, 9};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(paths[k].energy == energies[k]);
    CHECK(paths[k].weight == doctest::Approx(std::exp(-energies[k])).epsilon(1e-14));
  }

  PathOptions strict{0.02, 1'000'000, true};
  const auto s = enumerate_paths(f, 1.0, strict);
  REQUIRE(s.size() == 1);
  CHECK(s[0].vertices == std::vector<std::size_t>{0, 1, 2, 3});

  PathOptions relaxed{0.02, 1'000'000, false};
  const auto r = enumerate_paths(f, 1.0, relaxed);
  REQUIRE(r.size() == 2);
  CHECK(r[1].vertices == std::vector<std::size_t>{0, 3});

  PathOptions tight{0.0, 3, false};
  CHECK(error_code([&] { enumerate_paths(f, 1.0, tight); }) == ErrorCode::TooManyPaths);
  PathOptions bad{1.5, 10, false};
  CHECK(error_code([&] { enumerate_paths(f, 1.0, bad); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("brute force oracle on small fixtures") {
  const auto d = fixtures::line_distances({0, 1, 2, 3});
  CHECK(same_paths(brute_force_paths(d, weights_of(d), 0, 3), enumerate_paths(directed_flow_matrix(d, 0, 3), 1.0)));

  const auto d2 = fixtures::line_distances({0, 1});
  const auto two = brute_force_paths(d2, weights_of(d2), 0, 1);
  REQUIRE(two.size() == 1);
  CHECK(two[0].vertices == std::vector<std::size_t>{0, 1});

  const auto d10 = fixtures::line_distances({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(error_code([&] { brute_force_paths(d10, weights_of(d10), 0, 9); }) == ErrorCode::OracleBound);
}

TEST_CASE("pruning exactness and reversal") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = fixtures::random_euclidean(9, rng, 2, 0.6);
    const auto f = directed_flow_matrix(d, 0, 8);
    const auto all = enumerate_paths(f, 1.0);
    for (double lambda : {0.3, 0.6, 0.8, 0.95}) {
      PathOptions po{lambda, 1'000'000, false};
      const auto pruned = enumerate_paths(f, 1.0, po);
      std::vector<PathRecord> filtered;
      for (const auto& p : all) {
        if (p.weight >= lambda || p.vertices == std::vector<std::size_t>{0, 8}) filtered.push_back(p);
      }
      CHECK(pruned == filtered);
    }
    // reverse(gamma) is admissible for (j, i) with equal energy.
    const auto back = enumerate_paths(directed_flow_matrix(d, 8, 0), 1.0);
    REQUIRE(back.size() == all.size());
    std::set<std::vector<std::size_t>> reversed;
    for (auto p : back) {
      std::reverse(p.vertices.begin(), p.vertices.end());
      reversed.insert(p.vertices);
    }
    for (const auto& p : all) {
      CHECK(reversed.contains(p.vertices));
      double product = 1.0;
      for (std::size_t k = 0; k + 1 < p.vertices.size(); ++k) product *= std::exp(-d(p.vertices[k], p.vertices[k + 1]) * d(p.vertices[k], p.vertices[k + 1]));
      CHECK(std::abs(product - p.weight) <= 1e-12);
      std::set<std::size_t> distinct(p.vertices.begin(), p.vertices.end());
      CHECK(distinct.size() == p.vertices.size());
    }
  }
}

TEST_CASE("far vertex leaves the flow graph unchanged") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = fixtures::random_euclidean(8, rng, 2);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(9, 9);
    e.topLeftCorner(8, 8) = d;
    for (int k = 0; k < 8; ++k) e(8, k) = e(k, 8) = 100.0;
    const auto f = directed_flow_matrix(d, 0, 7);
    const auto g = directed_flow_matrix(e, 0, 7);
    CHECK(g.binary().topLeftCorner(8, 8) == f.binary());
    CHECK(g.binary().row(8).sum() + g.binary().col(8).sum() == 0);
    CHECK(enumerate_paths(g, 1.0) == enumerate_paths(f, 1.0));
  }
}

TEST_CASE("sample walk") {
  const auto t3 = directed_flow_matrix(fixtures::t3_distances(), 0, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto w = sample_walk(t3, seed, 10);
    CHECK(w.status == WalkStatus::Reached);
    CHECK(w.trajectory == std::vector<std::size_t>{0, 2});
  }

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = fixtures::random_euclidean(15, rng, 2);
    const auto f = directed_flow_matrix(d, 3, 11);
    const auto w = sample_walk(f, 100 + trial, 100);
    const auto replay = sample_walk(f, 100 + trial, 100);
    CHECK(replay.trajectory == w.trajectory);
    CHECK(w.trajectory.front() == 3);
    for (std::size_t k = 0; k + 1 < w.trajectory.size(); ++k) {
      CHECK(d(3, w.trajectory[k]) < d(3, w.trajectory[k + 1]));
      CHECK(d(11, w.trajectory[k]) > d(11, w.trajectory[k + 1]));
      CHECK(f.edge(w.trajectory[k], w.trajectory[k + 1]));
    }
    if (w.status == WalkStatus::Reached) {
      CHECK(w.trajectory.back() == 11);
    } else {
      CHECK(f.successors(w.trajectory.back()).empty());
    }
  }
  const auto line = directed_flow_matrix(fixtures::line_distances({0, 1, 2, 3}), 0, 3);
  CHECK(error_code([&] { sample_walk(line, 1, 0); }) == ErrorCode::MaxStepsExceeded);
}

TEST_CASE("unit uniform is in [0, 1)") {
  std::mt19937_64 rng(0);
  double lo = 1.0;
  double hi = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double u = unit_uniform(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}
