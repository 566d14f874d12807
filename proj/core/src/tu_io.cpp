#include "grapple/tu_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "grapple/error.hpp"

namespace fs = std::filesystem;

namespace grapple {

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  check(in.good(), "missing or unreadable file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

int parse_int(const std::string& token, const fs::path& file, size_t line_no) {
  const char* b = token.data();
  const char* e = token.data() + token.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  int value = 0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  check(ec == std::errc() && ptr == e && b != e,
        file.filename().string() + ":" + std::to_string(line_no) +
            ": non-integer token '" + token + "'");
  return value;
}

// One integer per non-blank line; (value, original line number) pairs.
std::vector<std::pair<int, size_t>> parse_int_column(const fs::path& file) {
  std::vector<std::pair<int, size_t>> out;
  const auto lines = read_lines(file);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    out.push_back({parse_int(lines[i], file, i + 1), i + 1});
  }
  return out;
}

// Remaps raw integer labels to 0-based indices in sorted order.
std::map<int, int> sorted_remap(const std::set<int>& raw) {
  std::map<int, int> remap;
  int next = 0;
  for (int v : raw) remap[v] = next++;
  return remap;
}

}  // namespace

Dataset parse_tu_dataset(const std::string& directory, const std::string& name) {
  const fs::path dir(directory);
  const fs::path a_file = dir / (name + "_A.txt");
  const fs::path ind_file = dir / (name + "_graph_indicator.txt");
  const fs::path glab_file = dir / (name + "_graph_labels.txt");
  const fs::path nlab_file = dir / (name + "_node_labels.txt");

  // Graph membership per node. Ids must be 1-based and non-decreasing.
  const auto indicator = parse_int_column(ind_file);
  const int total_nodes = static_cast<int>(indicator.size());
  check(total_nodes > 0, ind_file.string() + ": no nodes");
  int num_graphs = 0;
  std::vector<int> graph_of_node(total_nodes);
  for (int i = 0; i < total_nodes; ++i) {
    auto [gid, line_no] = indicator[i];
    check(gid >= 1, ind_file.filename().string() + ":" + std::to_string(line_no) +
                        ": graph id " + std::to_string(gid) + " is not 1-based");
    check(gid >= num_graphs,
          ind_file.filename().string() + ":" + std::to_string(line_no) +
              ": graph ids must be non-decreasing");
    check(gid <= num_graphs + 1,
          ind_file.filename().string() + ":" + std::to_string(line_no) +
              ": graph id jumps from " + std::to_string(num_graphs) + " to " +
              std::to_string(gid));
    num_graphs = std::max(num_graphs, gid);
    graph_of_node[i] = gid - 1;
  }

  // Node index of the first node of each graph, for global->local mapping.
  std::vector<int> first_node(num_graphs, -1);
  std::vector<int> node_counts(num_graphs, 0);
  for (int i = 0; i < total_nodes; ++i) {
    if (first_node[graph_of_node[i]] < 0) first_node[graph_of_node[i]] = i;
    node_counts[graph_of_node[i]] += 1;
  }

  // Graph labels, remapped to contiguous 0-based indices in sorted order.
  const auto raw_glabels = parse_int_column(glab_file);
  check(static_cast<int>(raw_glabels.size()) == num_graphs,
        glab_file.filename().string() + ": " + std::to_string(raw_glabels.size()) +
            " labels for " + std::to_string(num_graphs) + " graphs");
  std::set<int> distinct_glabels;
  for (auto [v, _] : raw_glabels) distinct_glabels.insert(v);
  const auto glabel_remap = sorted_remap(distinct_glabels);

  // Node labels (optional) -> one-hot features; otherwise all-ones column.
  const bool has_node_labels = fs::exists(nlab_file);
  std::vector<int> node_label(total_nodes, 0);
  int feature_dim = 1;
  if (has_node_labels) {
    const auto raw_nlabels = parse_int_column(nlab_file);
    check(static_cast<int>(raw_nlabels.size()) == total_nodes,
          nlab_file.filename().string() + ": " + std::to_string(raw_nlabels.size()) +
              " labels for " + std::to_string(total_nodes) + " nodes");
    std::set<int> distinct;
    for (auto [v, _] : raw_nlabels) distinct.insert(v);
    const auto remap = sorted_remap(distinct);
    feature_dim = static_cast<int>(distinct.size());
    for (int i = 0; i < total_nodes; ++i) node_label[i] = remap.at(raw_nlabels[i].first);
  }

  Dataset ds;
  ds.name = name;
  ds.num_classes = static_cast<int>(distinct_glabels.size());
  ds.feature_dim = feature_dim;
  ds.has_node_labels = has_node_labels;
  ds.graphs.resize(num_graphs);
  for (int g = 0; g < num_graphs; ++g) {
    Graph& gr = ds.graphs[g];
    gr.num_nodes = node_counts[g];
    gr.graph_id = g;
    gr.label = glabel_remap.at(raw_glabels[g].first);
    gr.node_features = Matrix(gr.num_nodes, feature_dim, has_node_labels ? 0.0 : 1.0);
  }
  if (has_node_labels)
    for (int i = 0; i < total_nodes; ++i) {
      Graph& gr = ds.graphs[graph_of_node[i]];
      gr.node_features.at(i - first_node[graph_of_node[i]], node_label[i]) = 1.0;
    }

  // Edges: 1-based "i, j" pairs; both endpoints must live in one graph.
  const auto a_lines = read_lines(a_file);
  for (size_t ln = 0; ln < a_lines.size(); ++ln) {
    if (is_blank(a_lines[ln])) continue;
    const std::string& line = a_lines[ln];
    const size_t comma = line.find(',');
    check(comma != std::string::npos, a_file.filename().string() + ":" +
                                          std::to_string(ln + 1) +
                                          ": expected 'i, j' edge pair");
    const int i = parse_int(line.substr(0, comma), a_file, ln + 1);
    const int j = parse_int(line.substr(comma + 1), a_file, ln + 1);
    check(i >= 1 && i <= total_nodes && j >= 1 && j <= total_nodes,
          a_file.filename().string() + ":" + std::to_string(ln + 1) +
              ": node id out of range [1," + std::to_string(total_nodes) + "]");
    const int g = graph_of_node[i - 1];
    check(graph_of_node[j - 1] == g,
          a_file.filename().string() + ":" + std::to_string(ln + 1) + ": edge (" +
              std::to_string(i) + "," + std::to_string(j) +
              ") references a node of another graph");
    if (i == j) continue;  // self-loops dropped (they would corrupt the walk PE)
    ds.graphs[g].edges.push_back({i - 1 - first_node[g], j - 1 - first_node[g]});
  }

  // Undirectedness is verified, never repaired: every (u,v) needs its (v,u).
  for (const Graph& gr : ds.graphs) {
    std::map<std::pair<int, int>, int> count;
    for (auto [u, v] : gr.edges) count[{u, v}] += 1;
    for (auto& [e, c] : count) {
      auto it = count.find({e.second, e.first});
      check(it != count.end() && it->second == c,
            name + ": graph " + std::to_string(gr.graph_id) + ": adjacency not " +
                "symmetric at edge (" + std::to_string(e.first) + "," +
                std::to_string(e.second) + ")");
    }
  }
  return ds;
}

void serialize_tu_dataset(const Dataset& ds, const std::string& directory) {
  check(!ds.graphs.empty(), "serialize_tu_dataset: empty dataset");
  const fs::path dir(directory);
  fs::create_directories(dir);
  std::ofstream a(dir / (ds.name + "_A.txt"));
  std::ofstream ind(dir / (ds.name + "_graph_indicator.txt"));
  std::ofstream glab(dir / (ds.name + "_graph_labels.txt"));
  check(a.good() && ind.good() && glab.good(),
        "serialize_tu_dataset: cannot write into " + dir.string());

  std::ofstream nlab;
  if (ds.has_node_labels) {
    nlab.open(dir / (ds.name + "_node_labels.txt"));
    check(nlab.good(), "serialize_tu_dataset: cannot write node labels");
  }

  int offset = 0;
  for (size_t g = 0; g < ds.graphs.size(); ++g) {
    const Graph& gr = ds.graphs[g];
    glab << gr.label << "\n";
    for (int i = 0; i < gr.num_nodes; ++i) {
      ind << (g + 1) << "\n";
      if (ds.has_node_labels) {
        // Features must be exactly one-hot to be expressible as node labels.
        int hot = -1;
        for (int j = 0; j < gr.node_features.cols; ++j) {
          const double v = gr.node_features.at(i, j);
          if (v == 1.0 && hot < 0) {
            hot = j;
          } else {
            check(v == 0.0, "serialize_tu_dataset: node features of graph " +
                                std::to_string(g) + " are not one-hot");
          }
        }
        check(hot >= 0, "serialize_tu_dataset: node features of graph " +
                            std::to_string(g) + " are not one-hot");
        nlab << hot << "\n";
      }
    }
    for (auto [u, v] : gr.edges)
      a << (u + 1 + offset) << ", " << (v + 1 + offset) << "\n";
    offset += gr.num_nodes;
  }
}

}  // namespace grapple
