#include "grapple/synthetic.hpp"

#include <vector>

#include "grapple/error.hpp"

namespace grapple {

namespace {

void add_undirected(Graph& g, int u, int v) {
  g.edges.push_back({u, v});
  g.edges.push_back({v, u});
}

Graph erdos_renyi(int n, double p, RngStream& rng) {
  Graph g;
  g.num_nodes = n;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(p)) add_undirected(g, u, v);
  return g;
}

Graph two_communities(int n, double p_in, double p_cross, RngStream& rng) {
  Graph g;
  g.num_nodes = n;
  const int half = n / 2;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      const bool same = (u < half) == (v < half);
      if (rng.bernoulli(same ? p_in : p_cross)) add_undirected(g, u, v);
    }
  return g;
}

}  // namespace

std::vector<Graph> generate_synthetic_dataset(int num_graphs, const SyntheticSpec& spec,
                                              uint64_t seed) {
  check(num_graphs > 0, "generate_synthetic_dataset: need at least one graph");
  check(spec.min_nodes >= 4 && spec.max_nodes >= spec.min_nodes,
        "generate_synthetic_dataset: bad node-count range");
  RngStream rng(seed, /*stream_id=*/51);
  std::vector<Graph> out;
  out.reserve(num_graphs);
  for (int i = 0; i < num_graphs; ++i) {
    const int n = spec.min_nodes +
                  static_cast<int>(rng.uniform_int(spec.max_nodes - spec.min_nodes + 1));
    const int label = i % 2;  // alternating -> balanced within +-1
    Graph g = label == 0 ? erdos_renyi(n, spec.er_edge_prob, rng)
                         : two_communities(n, spec.community_in_prob,
                                           spec.community_cross_prob, rng);
    g.label = label;
    g.graph_id = i;
    g.node_features = Matrix::ones(n, 1);  // featureless corpus: constant column
    out.push_back(std::move(g));
  }
  return out;
}

long long count_triangles(const Graph& g) {
  const int n = g.num_nodes;
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (auto [u, v] : g.edges) adj[u][v] = 1;
  long long count = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c)
        if (adj[a][b] && adj[b][c] && adj[a][c]) ++count;
  return count;
}

}  // namespace grapple
