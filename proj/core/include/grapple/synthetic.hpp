#pragma once

#include <vector>

#include "grapple/graph.hpp"
#include "grapple/rng.hpp"

namespace grapple {

// Two-class desk-scale corpus: class 0 graphs are Erdős–Rényi, class 1
// graphs are two dense communities with sparse cross links (strictly more
// triangles in expectation). Labels alternate, so class counts are
// balanced within one. Deterministic for a fixed seed.
struct SyntheticSpec {
  int min_nodes = 12;
  int max_nodes = 20;
  double er_edge_prob = 0.2;
  double community_in_prob = 0.45;
  double community_cross_prob = 0.05;
};

std::vector<Graph> generate_synthetic_dataset(int num_graphs, const SyntheticSpec& spec,
                                              uint64_t seed);

// Exact triangle count via the brute-force triple loop; used as the oracle
// that the two generators are actually distinguishable.
long long count_triangles(const Graph& g);

}  // namespace grapple
