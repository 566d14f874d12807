#include "grapple/graph.hpp"

#include <algorithm>
#include <set>

#include "grapple/error.hpp"

namespace grapple {

bool Graph::operator==(const Graph& o) const {
  return num_nodes == o.num_nodes && edges == o.edges && label == o.label &&
         node_features.same_shape(o.node_features) &&
         node_features.a == o.node_features.a;
}

void validate_graph(const Graph& g) {
  check(g.num_nodes > 0, "graph " + std::to_string(g.graph_id) + ": no nodes");
  check(g.node_features.rows == g.num_nodes,
        "graph " + std::to_string(g.graph_id) + ": feature rows " +
            std::to_string(g.node_features.rows) + " != num_nodes " +
            std::to_string(g.num_nodes));
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : g.edges) {
    check(u >= 0 && u < g.num_nodes && v >= 0 && v < g.num_nodes,
          "graph " + std::to_string(g.graph_id) + ": edge endpoint out of range");
    check(u != v, "graph " + std::to_string(g.graph_id) + ": self-loop at node " +
                      std::to_string(u));
    seen.insert({u, v});
  }
  for (auto [u, v] : seen)
    check(seen.count({v, u}) > 0, "graph " + std::to_string(g.graph_id) +
                                      ": edge (" + std::to_string(u) + "," +
                                      std::to_string(v) + ") lacks its reverse");
}

int GraphBatch::graph_begin(int g) const {
  check(g >= 0 && g < num_graphs, "GraphBatch: graph index out of range");
  int b = 0;
  for (int i = 0; i < g; ++i) b += graph_sizes[i];
  return b;
}

GraphBatch batch_graphs(const std::vector<Graph>& graphs) {
  check(!graphs.empty(), "batch_graphs: empty graph list");
  const int d = graphs[0].node_features.cols;
  GraphBatch b;
  b.num_graphs = static_cast<int>(graphs.size());
  for (const Graph& g : graphs) {
    check(g.node_features.cols == d,
          "batch_graphs: mixed feature dimensions (" + std::to_string(d) + " vs " +
              std::to_string(g.node_features.cols) + ")");
    b.total_nodes += g.num_nodes;
  }
  b.node_features = Matrix(b.total_nodes, d);
  b.membership.reserve(b.total_nodes);
  int offset = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const Graph& g = graphs[gi];
    b.graph_sizes.push_back(g.num_nodes);
    b.labels.push_back(g.label);
    for (int i = 0; i < g.num_nodes; ++i) {
      b.membership.push_back(gi);
      std::copy(g.node_features.row(i), g.node_features.row(i) + d,
                b.node_features.row(offset + i));
    }
    for (auto [u, v] : g.edges) b.edges.push_back({u + offset, v + offset});
    offset += g.num_nodes;
  }
  return b;
}

std::vector<Graph> split_batch(const GraphBatch& batch) {
  std::vector<Graph> out(batch.num_graphs);
  const int d = batch.node_features.cols;
  int offset = 0;
  for (int gi = 0; gi < batch.num_graphs; ++gi) {
    Graph& g = out[gi];
    g.num_nodes = batch.graph_sizes[gi];
    g.label = batch.labels[gi];
    g.graph_id = gi;
    g.node_features = Matrix(g.num_nodes, d);
    for (int i = 0; i < g.num_nodes; ++i)
      std::copy(batch.node_features.row(offset + i),
                batch.node_features.row(offset + i) + d, g.node_features.row(i));
    offset += g.num_nodes;
  }
  for (auto [u, v] : batch.edges) {
    const int gi = batch.membership[u];
    check(batch.membership[v] == gi, "split_batch: edge crosses graph boundary");
    const int b = batch.graph_begin(gi);
    out[gi].edges.push_back({u - b, v - b});
  }
  return out;
}

}  // namespace grapple
