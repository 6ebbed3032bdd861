#include "onphase/interaction_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "onphase/error.hpp"
#include "onphase/format.hpp"

namespace onphase::graph {

InteractionGraph::InteractionGraph(
    std::size_t node_count, double threshold,
    std::vector<std::pair<std::size_t, std::size_t>> edges)
    : node_count_(node_count), threshold_(threshold), edges_(std::move(edges)) {
  for (auto& [a, b] : edges_) {
    if (a == b) throw Error(ErrorKind::Validation, "self-loop at node " + std::to_string(a));
    if (a >= node_count_ || b >= node_count_) {
      throw Error(ErrorKind::Range, "edge endpoint outside [0, " + std::to_string(node_count_) + ")");
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

std::vector<std::size_t> InteractionGraph::degrees() const {
  std::vector<std::size_t> deg(node_count_, 0);
  for (const auto& [a, b] : edges_) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

double dominance_threshold(std::size_t dim, double k) {
  if (dim == 0) throw Error(ErrorKind::Domain, "embedding dimension must be positive");
  if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorKind::Domain, "k must be positive");
  return k / std::sqrt(static_cast<double>(dim));
}

InteractionGraph build_interaction_graph(const ingest::EmbeddingSequence& seq,
                                         double threshold) {
  const std::size_t len = seq.length();
  const std::size_t n = seq.dim();
  std::vector<double> unit(len * n);
  for (std::size_t i = 0; i < len; ++i) {
    const auto v = seq.vector(i);
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (!(norm2 > 0.0)) {
      throw Error(ErrorKind::Degenerate, "zero-norm vector at position " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t k = 0; k < n; ++k) unit[i * n + k] = v[k] * inv;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t a = 0; a < len; ++a) {
    for (std::size_t b = a + 1; b < len; ++b) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += unit[a * n + k] * unit[b * n + k];
      if (std::abs(dot) > threshold) edges.emplace_back(a, b);
    }
  }
  return InteractionGraph(len, threshold, std::move(edges));
}

double mean_sq_random_inner(std::size_t dim, std::size_t trials, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorKind::Domain, "dimension must be positive");
  if (trials == 0) throw Error(ErrorKind::Domain, "trials must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<double> u(dim), v(dim);
  double acc = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    double nu = 0.0, nv = 0.0, dot = 0.0;
    do {
      nu = 0.0;
      for (auto& x : u) { x = gauss(rng); nu += x * x; }
    } while (nu == 0.0);
    do {
      nv = 0.0;
      for (auto& x : v) { x = gauss(rng); nv += x * x; }
    } while (nv == 0.0);
    for (std::size_t k = 0; k < dim; ++k) dot += u[k] * v[k];
    acc += dot * dot / (nu * nv);
  }
  return acc / static_cast<double>(trials);
}

double twonn_dimension(const PointCloud& points) {
  if (points.dim == 0 || points.coords.size() % points.dim != 0) {
    throw Error(ErrorKind::Validation, "point cloud has inconsistent dimension");
  }
  const std::size_t d = points.dim;

  // Deduplicate by sorting row indices lexicographically.
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto pa = points.point(a);
    const auto pb = points.point(b);
    return std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end());
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<double> unique;
  unique.reserve(points.coords.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto p = points.point(order[i]);
    if (i > 0 && std::equal(p.begin(), p.end(), points.point(order[i - 1]).begin())) continue;
    unique.insert(unique.end(), p.begin(), p.end());
  }
  const std::size_t n = unique.size() / d;
  if (n < 10) {
    throw Error(ErrorKind::InsufficientData,
                "TwoNN needs at least 10 distinct points, got " + std::to_string(n));
  }

  std::vector<double> r1(n, std::numeric_limits<double>::infinity());
  std::vector<double> r2(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    const double* pi = unique.data() + i * d;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* pj = unique.data() + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = pi[k] - pj[k];
        s += diff * diff;
      }
      for (std::size_t idx : {i, j}) {
        if (s < r1[idx]) {
          r2[idx] = r1[idx];
          r1[idx] = s;
        } else if (s < r2[idx]) {
          r2[idx] = s;
        }
      }
    }
  }

  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(r1[i] > 0.0)) {
      throw Error(ErrorKind::Degenerate, "zero nearest-neighbour distance after deduplication");
    }
    // squared distances: ln(r2/r1) = 0.5 ln(r2^2/r1^2)
    sum_log += 0.5 * std::log(r2[i] / r1[i]);
  }
  if (!(sum_log > 0.0)) {
    throw Error(ErrorKind::Degenerate, "all points have equidistant first and second neighbours");
  }
  return static_cast<double>(n) / sum_log;
}

GraphStats graph_stats(const InteractionGraph& g) {
  GraphStats stats;
  const std::size_t n = g.node_count();
  if (n == 0) return stats;
  stats.mean_degree = 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(n);

  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [a, b] : g.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& nb : adj) std::sort(nb.begin(), nb.end());

  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++stats.component_count;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }

  // Transitivity: 3 * triangles / connected triples.
  double triples = 0.0;
  double triangles = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    const double k = static_cast<double>(adj[u].size());
    triples += k * (k - 1.0) / 2.0;
  }
  for (const auto& [a, b] : g.edges()) {
    std::size_t i = 0, j = 0;
    while (i < adj[a].size() && j < adj[b].size()) {
      if (adj[a][i] < adj[b][j]) {
        ++i;
      } else if (adj[a][i] > adj[b][j]) {
        ++j;
      } else {
        if (adj[a][i] > b) triangles += 1.0;  // count each triangle once: a < b < c
        ++i;
        ++j;
      }
    }
  }
  stats.clustering_coefficient = triples > 0.0 ? 3.0 * triangles / triples : 0.0;
  return stats;
}

std::string edge_list(const InteractionGraph& g) {
  std::string out = "# L " + std::to_string(g.node_count()) + " threshold " +
                    format_double(g.threshold()) + "\n";
  for (const auto& [a, b] : g.edges()) {
    out += std::to_string(a) + " " + std::to_string(b) + "\n";
  }
  return out;
}

void write_edge_list(const InteractionGraph& g, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f << edge_list(g);
}

}  // namespace onphase::graph
