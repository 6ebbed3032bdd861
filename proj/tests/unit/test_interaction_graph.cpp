#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "check_error.hpp"
#include "onphase/interaction_graph.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace onphase;
using namespace onphase::graph;
using ingest::EmbeddingSequence;

namespace {

EmbeddingSequence seq_of(const std::vector<std::vector<double>>& vecs) {
  std::vector<double> flat;
  for (const auto& v : vecs) flat.insert(flat.end(), v.begin(), v.end());
  return EmbeddingSequence(vecs.front().size(), flat, 1.0);
}

std::vector<std::vector<double>> random_vectors(std::size_t l, std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> v(l, std::vector<double>(n));
  for (auto& x : v)
    for (auto& c : x) c = g(rng);
  return v;
}

PointCloud uniform_cube(std::size_t count, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud p;
  p.dim = d;
  for (std::size_t i = 0; i < count * d; ++i) p.coords.push_back(u(rng));
  return p;
}

}  // namespace

TEST_CASE("dominance_threshold") {
  CHECK(dominance_threshold(100) == doctest::Approx(0.1));
  CHECK(dominance_threshold(4, 3.0) == doctest::Approx(1.5));
  CHECK(dominance_threshold(1) == 1.0);
  CHECK_ERROR_KIND(dominance_threshold(0), ErrorKind::Domain);
}

TEST_CASE("build_interaction_graph worked examples") {
  SUBCASE("identical vectors give a triangle") {
    const auto g = build_interaction_graph(seq_of({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}}), 0.5);
    CHECK(g.edge_count() == 3);
  }
  SUBCASE("orthogonal vectors give no edges") {
    const auto g = build_interaction_graph(seq_of({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 0.5);
    CHECK(g.edge_count() == 0);
  }
  SUBCASE("cosines 0.6, 0.3, 0.1 give one edge") {
    // Unit vectors with Gram matrix [[1,.6,.3],[.6,1,.1],[.3,.1,1]] via Cholesky.
    const double a = 0.6, b = 0.3, c = 0.1;
    const double l22 = std::sqrt(1 - a * a);
    const double l32 = (c - a * b) / l22;
    const double l33 = std::sqrt(1 - b * b - l32 * l32);
    const auto g = build_interaction_graph(seq_of({{1, 0, 0}, {a, l22, 0}, {b, l32, l33}}), 0.5);
    REQUIRE(g.edge_count() == 1);
    CHECK(g.edges()[0] == std::pair<std::size_t, std::size_t>{0, 1});
  }
  SUBCASE("anti-aligned vectors count by magnitude") {
    const auto g = build_interaction_graph(seq_of({{1, 0}, {-2, 0}}), 0.5);
    CHECK(g.edge_count() == 1);
  }
  SUBCASE("zero vector") {
    CHECK_ERROR_KIND(build_interaction_graph(seq_of({{1, 0}, {0, 0}}), 0.5), ErrorKind::Degenerate);
  }
}

TEST_CASE("edges agree with a direct pairwise check") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto v = random_vectors(15, 4, rng);
    const double thr = 0.4;
    const auto g = build_interaction_graph(seq_of(v), thr);
    std::vector<std::pair<std::size_t, std::size_t>> want;
    for (std::size_t s = 0; s < v.size(); ++s)
      for (std::size_t t = s + 1; t < v.size(); ++t) {
        double dot = 0, ns = 0, nt = 0;
        for (std::size_t k = 0; k < 4; ++k) {
          dot += v[s][k] * v[t][k];
          ns += v[s][k] * v[s][k];
          nt += v[t][k] * v[t][k];
        }
        if (std::abs(dot) / std::sqrt(ns * nt) > thr) want.emplace_back(s, t);
      }
    CHECK(g.edges() == want);
  }
}

TEST_CASE("raising the threshold never adds edges") {
  std::mt19937_64 rng(3);
  const auto s = seq_of(random_vectors(30, 6, rng));
  std::size_t prev = build_interaction_graph(s, 0.0).edge_count();
  for (double thr = 0.05; thr <= 1.0; thr += 0.05) {
    const auto g = build_interaction_graph(s, thr);
    CHECK(g.edge_count() <= prev);
    prev = g.edge_count();
  }
}

TEST_CASE("graph statistics are invariant under position relabeling") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto v = random_vectors(20, 5, rng);
    const auto g1 = build_interaction_graph(seq_of(v), 0.45);
    std::shuffle(v.begin(), v.end(), rng);
    const auto g2 = build_interaction_graph(seq_of(v), 0.45);
    CHECK(g1.edge_count() == g2.edge_count());
    auto d1 = g1.degrees(), d2 = g2.degrees();
    std::sort(d1.begin(), d1.end());
    std::sort(d2.begin(), d2.end());
    CHECK(d1 == d2);
    const auto s1 = graph_stats(g1), s2 = graph_stats(g2);
    CHECK(s1.component_count == s2.component_count);
    CHECK(s1.clustering_coefficient == doctest::Approx(s2.clustering_coefficient));
  }
}

TEST_CASE("graph_stats worked examples") {
  SUBCASE("triangle") {
    const auto s = graph_stats(InteractionGraph(3, 0.5, {{0, 1}, {1, 2}, {0, 2}}));
    CHECK(s.mean_degree == doctest::Approx(2.0));
    CHECK(s.component_count == 1);
    CHECK(s.clustering_coefficient == doctest::Approx(1.0));
  }
  SUBCASE("isolated nodes") {
    const auto s = graph_stats(InteractionGraph(3, 0.5, {}));
    CHECK(s.mean_degree == 0.0);
    CHECK(s.component_count == 3);
    CHECK(s.clustering_coefficient == 0.0);
  }
  SUBCASE("path") {
    const auto s = graph_stats(InteractionGraph(3, 0.5, {{0, 1}, {1, 2}}));
    CHECK(s.mean_degree == doctest::Approx(4.0 / 3.0));
    CHECK(s.component_count == 1);
    CHECK(s.clustering_coefficient == 0.0);
  }
  SUBCASE("triangle with a pendant") {
    // 1 triangle, connected triples: node0 1, node1 1, node2 3 -> 3*1/5.
    const auto s = graph_stats(InteractionGraph(4, 0.5, {{0, 1}, {1, 2}, {0, 2}, {2, 3}}));
    CHECK(s.clustering_coefficient == doctest::Approx(3.0 / 5.0));
  }
}

TEST_CASE("graph constructor rejects bad edges and dedupes") {
  CHECK_ERROR_KIND(InteractionGraph(3, 0.5, {{1, 1}}), ErrorKind::Validation);
  CHECK_ERROR_KIND(InteractionGraph(3, 0.5, {{0, 3}}), ErrorKind::Range);
  const InteractionGraph g(3, 0.5, {{2, 0}, {0, 2}, {1, 0}});
  CHECK(g.edge_count() == 2);
  CHECK(g.edges()[0] == std::pair<std::size_t, std::size_t>{0, 1});
}

TEST_CASE("edge list export") {
  const InteractionGraph g(3, 0.25, {{0, 1}, {1, 2}});
  std::istringstream in(edge_list(g));
  std::string hash, l_tag, thr_tag;
  std::size_t n;
  double thr;
  in >> hash >> l_tag >> n >> thr_tag >> thr;
  CHECK(hash == "#");
  CHECK(n == 3);
  CHECK(thr == 0.25);
  std::size_t a, b;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (in >> a >> b) edges.emplace_back(a, b);
  CHECK(edges == g.edges());
  testutil::TempDir dir;
  write_edge_list(g, dir / "g.txt");
  CHECK(testutil::slurp(dir / "g.txt") == edge_list(g));
}

TEST_CASE("mean_sq_random_inner") {
  CHECK(mean_sq_random_inner(1, 17, 4) == 1.0);
  CHECK(mean_sq_random_inner(2, 100000, 1) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(mean_sq_random_inner(100, 100000, 2) - 0.01) <= 0.001);
  CHECK(mean_sq_random_inner(7, 1000, 3) == mean_sq_random_inner(7, 1000, 3));
  // N * estimate -> 1 within 3 standard errors; Var[(u.v)^2] = 2(N-1)/(N^2(N+2)).
  for (std::size_t n : {3u, 10u, 50u}) {
    const std::size_t trials = 200000;
    const double nn = static_cast<double>(n);
    const double se = std::sqrt(2.0 * (nn - 1.0) / (nn * nn * (nn + 2.0)) / trials);
    CHECK(std::abs(mean_sq_random_inner(n, trials, 10 + n) - 1.0 / nn) <= 3.0 * se);
  }
  CHECK_ERROR_KIND(mean_sq_random_inner(0, 10, 1), ErrorKind::Domain);
  CHECK_ERROR_KIND(mean_sq_random_inner(3, 0, 1), ErrorKind::Domain);
}

TEST_CASE("twonn on known manifolds") {
  SUBCASE("unit square") {
    const double d = twonn_dimension(uniform_cube(5000, 2, 1));
    CHECK(d >= 1.8);
    CHECK(d <= 2.2);
  }
  SUBCASE("segment embedded in R^10") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto dir = oracle::random_unit(10, rng);
    PointCloud p;
    p.dim = 10;
    for (int i = 0; i < 5000; ++i) {
      const double s = u(rng);
      for (double c : dir) p.coords.push_back(0.3 + s * c);
    }
    const double d = twonn_dimension(p);
    CHECK(d >= 0.9);
    CHECK(d <= 1.1);
  }
  SUBCASE("too few points") { CHECK_ERROR_KIND(twonn_dimension(uniform_cube(5, 3, 1)), ErrorKind::InsufficientData); }
  SUBCASE("duplicates collapse before counting") {
    auto p = uniform_cube(6, 2, 4);
    const auto copy = p.coords;
    p.coords.insert(p.coords.end(), copy.begin(), copy.end());
    CHECK_ERROR_KIND(twonn_dimension(p), ErrorKind::InsufficientData);
  }
}

TEST_CASE("twonn is invariant under isometries and scaling") {
  const auto base = uniform_cube(600, 3, 9);
  const double d0 = twonn_dimension(base);
  std::mt19937_64 rng(10);
  const auto rot = oracle::random_rotation(3, rng);
  PointCloud moved;
  moved.dim = 3;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto p = base.point(i);
    for (std::size_t r = 0; r < 3; ++r) {
      double x = 0.0;
      for (std::size_t c = 0; c < 3; ++c) x += rot[r][c] * p[c];
      moved.coords.push_back(2.5 * x - 7.0 + r);
    }
  }
  CHECK(twonn_dimension(moved) == doctest::Approx(d0).epsilon(1e-9));
}
