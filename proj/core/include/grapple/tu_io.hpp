#pragma once

#include <string>

#include "grapple/graph.hpp"

namespace grapple {

// Reads a dataset in the TU benchmark layout from `directory`:
//   <name>_A.txt                "i, j" edge pairs, 1-based node ids
//   <name>_graph_indicator.txt  1-based graph id per node line
//   <name>_graph_labels.txt     one integer per graph
//   <name>_node_labels.txt      one integer per node (optional)
// Node indices become 0-based per graph. Node labels are one-hot encoded
// (sorted distinct values -> columns); without the node-label file every
// node gets the single all-ones feature. Graph labels are remapped to
// 0-based contiguous class indices in sorted order. Adjacency symmetry is
// verified, not repaired; self-loops are dropped. Malformed content is
// rejected with the file name and line number.
Dataset parse_tu_dataset(const std::string& directory, const std::string& name);

// Writes `ds` back out in the same layout (creating `directory` if needed).
// Labels are written as the parsed 0-based values, so a parse -> serialize ->
// parse round trip reproduces the dataset exactly.
void serialize_tu_dataset(const Dataset& ds, const std::string& directory);

}  // namespace grapple
