#pragma once

#include "grapple/graph.hpp"
#include "grapple/matrix.hpp"

namespace grapple {

// Random-walk structural encoding: column k (0-based storage, 1-based walk
// length) holds diag(T^k) where T = D^-1 A is the row-stochastic walk
// matrix of the graph. Isolated nodes have no walks and get all-zero rows.
// Every entry is a return probability, so rows lie in [0,1]^K; column 1 is
// all zeros because parsed graphs carry no self-loops.
Matrix compute_rwse(const Graph& graph, int num_steps);

// Per-node encodings for a whole batch, stacked in node order.
struct GraphBatch;
Matrix compute_rwse_batch(const GraphBatch& batch, int num_steps);

}  // namespace grapple
