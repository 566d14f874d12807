#include "grapple/rwse.hpp"

#include "grapple/error.hpp"

namespace grapple {

Matrix compute_rwse(const Graph& graph, int num_steps) {
  check(num_steps >= 1, "compute_rwse: num_steps must be >= 1");
  const int n = graph.num_nodes;

  // T = D^-1 A; rows of isolated nodes stay zero.
  Matrix t(n, n);
  std::vector<int> degree(n, 0);
  for (auto [u, v] : graph.edges) {
    check(u >= 0 && u < n && v >= 0 && v < n, "compute_rwse: edge endpoint out of range");
    degree[u] += 1;
  }
  for (auto [u, v] : graph.edges) t.at(u, v) += 1.0 / degree[u];

  Matrix out(n, num_steps);
  Matrix power = t;
  for (int k = 0; k < num_steps; ++k) {
    if (k > 0) power = matmul(power, t);
    for (int i = 0; i < n; ++i) out.at(i, k) = power.at(i, i);
  }
  return out;
}

Matrix compute_rwse_batch(const GraphBatch& batch, int num_steps) {
  Matrix out(batch.total_nodes, num_steps);
  const std::vector<Graph> graphs = split_batch(batch);
  int offset = 0;
  for (const Graph& g : graphs) {
    Matrix pe = compute_rwse(g, num_steps);
    for (int i = 0; i < g.num_nodes; ++i)
      std::copy(pe.row(i), pe.row(i) + num_steps, out.row(offset + i));
    offset += g.num_nodes;
  }
  return out;
}

}  // namespace grapple
