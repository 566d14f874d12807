#pragma once

#include <map>
#include <string>

#include "grapple/graph.hpp"
#include "grapple/params.hpp"
#include "grapple/perturb.hpp"
#include "grapple/tape.hpp"

namespace grapple {

struct EncoderConfig {
  int num_layers = 1;
  int num_heads = 4;
  int hidden_dim = 64;
  int pe_dim = 8;
  int input_dim = 0;  // node feature width, set from the dataset

  int head_dim() const { return hidden_dim / num_heads; }
  void validate() const;
};

// Creates the trainable grids in canonical order. Weight grids get scaled
// normal init; normalization gains start at one, offsets at zero; biases
// at zero. Names:
//   enc.input.w
//   enc.l<i>.{ln1,ln2,ln3}.{g,b}  enc.l<i>.gin.{w1,w2}
//   enc.l<i>.attn.h<j>.{wq,wk,wv}  enc.l<i>.attn.wo  enc.l<i>.ffn.{w1,w2}
//   proj.{w1,b1,w2,b2}   scorer.{w,b}
void add_encoder_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng);
void add_projection_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng);
void add_scorer_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng);

// Parameters lifted onto a tape as leaves, keyed by name. Lift once per
// tape; both encoder branches read the same leaves, so gradients from both
// branches accumulate on the shared parameters.
struct LiftedParams {
  std::map<std::string, Var> vars;
  Var at(const std::string& name) const;
  bool has(const std::string& name) const { return vars.count(name) > 0; }
};
LiftedParams lift_params(Tape& tape, const ParamStore& params,
                         bool requires_grad = true);

// Masked/noised view for the perturbed branch: weight masks and noise
// deltas are applied as tape constants over the shared leaves. Structural
// bits are not handled here (encode_batch reads them from the plan).
LiftedParams apply_plan_weights(Tape& tape, const LiftedParams& base,
                                const PerturbationPlan& plan);

// Batch-level constants shared by every view of one batch: edge endpoint
// vectors, the cross-graph attention mask (additive -1e9, which underflows
// to exact zeros after the row softmax, making batch encoding bitwise
// independent per graph), and the mean-pool readout matrix.
struct BatchWiring {
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  Matrix attn_mask;  // total_nodes x total_nodes
  Matrix pool;       // num_graphs x total_nodes, rows sum to 1
};
BatchWiring build_wiring(const GraphBatch& batch);

struct EncodeResult {
  Var node_reps;   // total_nodes x hidden
  Var graph_reps;  // num_graphs x hidden (mean-pool readout)
};

// One full encoder pass. `features` is the (possibly augmented) node
// feature grid as a tape node; `pe` is the (possibly masked) positional
// grid. Input = CONCAT(features; pe) -> input projection -> num_layers
// transformer layers -> mean pool.
//
// Layer recipe (pre-norm deltas, residual outside):
//   M    = GIN(LN1(H)) + MHA(LN2(H))
//   f(H) = M + FFN(LN3(H + M))
//   out  = ReLU(b_l * f(H) + H)
// A dropped layer (b_l = 0) computes ReLU(H) and skips f entirely; a
// dropped head contributes an exact zero block to the concat before W^O.
// Both shortcuts equal the multiply-by-zero semantics bit for bit and keep
// gradients correct (a zeroed branch carries zero gradient).
EncodeResult encode_batch(Tape& tape, const GraphBatch& batch, Var features, Var pe,
                          const EncoderConfig& cfg, const LiftedParams& p,
                          const BatchWiring& wiring, const PerturbationPlan& plan);

// Two-layer projection head g(h): d -> d with ReLU, then d -> d.
Var project_head(Tape& tape, Var graph_reps, const LiftedParams& p);

// Composed layer norm over rows (epsilon 1e-5), exposed for tests.
Var layer_norm(Tape& tape, Var x, Var gain, Var offset);

}  // namespace grapple
