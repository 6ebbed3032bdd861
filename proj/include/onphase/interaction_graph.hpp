#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onphase/ingest.hpp"

namespace onphase::graph {

/// Undirected simple graph over token positions. Edges are stored with
/// first < second, sorted.
class InteractionGraph {
 public:
  InteractionGraph(std::size_t node_count, double threshold,
                   std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t node_count() const noexcept { return node_count_; }
  double threshold() const noexcept { return threshold_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept {
    return edges_;
  }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::vector<std::size_t> degrees() const;

 private:
  std::size_t node_count_;
  double threshold_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

struct GraphStats {
  double mean_degree = 0.0;
  std::size_t component_count = 0;
  double clustering_coefficient = 0.0;
};

/// k / sqrt(N): two random unit vectors in R^N have E[(u.v)^2] = 1/N.
double dominance_threshold(std::size_t dim, double k = 1.0);

/// Edge (s, t) iff |cos(t_s, t_t)| > threshold.
InteractionGraph build_interaction_graph(const ingest::EmbeddingSequence& seq,
                                         double threshold);

double mean_sq_random_inner(std::size_t dim, std::size_t trials,
                            std::uint64_t seed);

/// Row-major point cloud: `count x dim`.
struct PointCloud {
  std::size_t dim = 0;
  std::vector<double> coords;

  std::size_t size() const noexcept { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * dim, dim};
  }
};

/// Two-nearest-neighbour maximum-likelihood estimate n / sum ln(r2/r1), on
/// the deduplicated cloud. Neighbour search is exact (brute force).
double twonn_dimension(const PointCloud& points);

GraphStats graph_stats(const InteractionGraph& g);

/// Header "# L <node_count> threshold <t>" then one "s t" line per edge.
std::string edge_list(const InteractionGraph& g);
void write_edge_list(const InteractionGraph& g, const std::filesystem::path& path);

}  // namespace onphase::graph
