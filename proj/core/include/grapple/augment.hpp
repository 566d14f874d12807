#pragma once

#include <string>
#include <vector>

#include "grapple/graph.hpp"
#include "grapple/matrix.hpp"
#include "grapple/rng.hpp"
#include "grapple/tape.hpp"

namespace grapple {

// Data-side view generators. All of them keep topology (node count, edges,
// membership) untouched; they only rewrite feature rows or PE entries.
enum class DataAugKind {
  identity,
  pe_mask,
  selective_node_mask,
  generative,
  feature_mask_baseline,
};

std::string to_string(DataAugKind kind);
DataAugKind data_aug_kind_from_string(const std::string& name);

struct DataAugSpec {
  DataAugKind kind = DataAugKind::identity;
  double ratio = 0.2;              // p: fraction masked / replaced
  double gumbel_temperature = 1.0; // softmax temperature for node scoring
  void validate() const;
};

// One Bernoulli(1-p) keep draw per entry; 1 = keep, 0 = zero out.
std::vector<int> sample_keep_bits(int count, double p, RngStream& rng);

// Zeroes the columns whose keep bit is 0; bits.size() must equal m.cols.
Matrix zero_masked_columns(const Matrix& m, const std::vector<int>& keep_bits);

// PE channel masking: draws one keep bit per PE channel (not per node) and
// zeroes the dropped channels for every node. The drawn bits are returned
// through bits_out when non-null so tests can assert against them.
Matrix mask_pe_channels(const Matrix& pe, double p, RngStream& rng,
                        std::vector<int>* bits_out = nullptr);

// Baseline column masking on node features: each feature dimension is
// zeroed independently with probability p across all nodes.
Matrix feature_mask_baseline(const Matrix& features, double p, RngStream& rng,
                             std::vector<int>* bits_out = nullptr);

// Hard selection rule: per graph, the ceil(p*n) nodes with the smallest
// soft weights get keep=0, everybody else keep=1; if that would mask the
// whole graph, the top-weight node is kept. Ties break toward masking the
// lower node index. weights.size() must equal batch.total_nodes.
std::vector<int> select_keep_mask(const std::vector<double>& weights,
                                  const GraphBatch& batch, double p);

// Selective node masking, built on an existing tape so the scorer receives
// gradient. Pipeline per node i in graph g:
//   score_i   = features_i · w + b + gumbel_i          (on tape)
//   S_i       = softmax over g's nodes of score_i / t  (on tape)
//   keep_i    = hard rule above, computed from S values (constant)
//   factor_i  = keep_i * n_g * S_i / sum_{kept j in g} S_j   (on tape)
//   features' = factor_i * features_i                  (on tape)
// The hard mask is a constant (straight-through); gradient reaches the
// scorer only through the soft weights of kept rows. PE rows of masked
// nodes are zeroed at value level (PE carries no gradient).
struct SelectiveMaskResult {
  Var features;                // total_nodes x d, augmented, on tape
  Var soft_weights;            // total_nodes x 1, per-graph softmax S
  Matrix pe;                   // PE with masked rows zeroed
  std::vector<int> keep_mask;  // per-node keep bits M
};

// Core form with explicit noise (total_nodes x 1) so checks can freeze or
// inject the draws.
SelectiveMaskResult selective_node_mask_with_noise(
    Tape& tape, const GraphBatch& batch, Var features, const Matrix& pe,
    Var scorer_w, Var scorer_b, double p, double temperature,
    const Matrix& gumbel_noise);

// Convenience form drawing standard Gumbel noise from the stream.
SelectiveMaskResult selective_node_mask(Tape& tape, const GraphBatch& batch,
                                        Var features, const Matrix& pe,
                                        Var scorer_w, Var scorer_b, double p,
                                        double temperature, RngStream& rng);

}  // namespace grapple
