#pragma once

#include <string>
#include <vector>

#include "grapple/matrix.hpp"

namespace grapple {

// One undirected graph. edges stores directed pairs with both directions
// present (the symmetric-adjacency invariant); no self-loops.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;  // 0-based, both directions
  Matrix node_features;                    // num_nodes x d
  int label = -1;                          // contiguous 0-based class index
  int graph_id = 0;

  int undirected_edge_count() const { return static_cast<int>(edges.size()) / 2; }
  bool operator==(const Graph& o) const;
};

// A parsed dataset plus the facts needed to write it back out faithfully.
struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  int feature_dim = 0;
  bool has_node_labels = false;  // false -> features are the all-ones column
};

// Block-diagonal concatenation of several graphs.
struct GraphBatch {
  int total_nodes = 0;
  int num_graphs = 0;
  std::vector<std::pair<int, int>> edges;  // globally re-indexed
  Matrix node_features;                    // total_nodes x d
  std::vector<int> membership;             // per node, graph index (non-decreasing)
  std::vector<int> graph_sizes;
  std::vector<int> labels;

  // Node index ranges per graph, derived from graph_sizes.
  int graph_begin(int g) const;
  int graph_end(int g) const { return graph_begin(g) + graph_sizes[g]; }
};

// Requires all graphs to share the feature dimension; rejects empty input.
GraphBatch batch_graphs(const std::vector<Graph>& graphs);

// Inverse of batch_graphs (labels and ids restored positionally).
std::vector<Graph> split_batch(const GraphBatch& batch);

void validate_graph(const Graph& g);  // endpoint range, symmetry, no self-loops

}  // namespace grapple
