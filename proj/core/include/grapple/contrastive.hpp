#pragma once

#include <string>

#include "grapple/augment.hpp"
#include "grapple/encoder.hpp"
#include "grapple/graph.hpp"
#include "grapple/mae.hpp"
#include "grapple/perturb.hpp"
#include "grapple/rng.hpp"
#include "grapple/tape.hpp"

namespace grapple {

// Which view groups contribute to the training loss.
//   dual:         (z1,z2) + (z3,z4) + (z1,z3) + (z2,z4)
//   data_only:    (z1,z3)  — two data views through the unperturbed encoder
//   model_only:   (z1,z2)  — one data view through both encoders
//   pairwise_all: all 6 unordered view pairs (ablation)
enum class TrainMode { dual, data_only, model_only, pairwise_all };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

// NT-Xent over two aligned N x d views, on tape. Cosine similarities; for
// anchor n the positive is row n of the partner view and the negatives are
// the partner view's other N-1 rows (the positive is excluded from the
// denominator). Per-anchor loss -log(exp(s_nn/t) / sum_m exp(s_nm/t)),
// averaged over anchors and symmetrized over both directions.
Var nt_xent_group(Tape& tape, Var za, Var zb, double temperature);

// Value-level convenience (runs a scratch tape).
double nt_xent_group_value(const Matrix& za, const Matrix& zb, double temperature);

// Projected views. z1 = f(G_A), z2 = f-hat(G_A), z3 = f(G_B),
// z4 = f-hat(G_B). Views a mode does not use are left invalid.
struct FourViewEmbeddings {
  Var z1, z2, z3, z4;
};

// Running totals of structural drops, for run-log summaries.
struct StructuralDropCounts {
  long long layers = 0;
  long long heads = 0;
};

// Everything a four-view forward pass reads. The perturbation plan carries
// the per-epoch weight masks / noise deltas; structural keep bits are
// resampled here for every pass of the perturbed branch.
struct ForwardContext {
  const GraphBatch* batch = nullptr;
  const Matrix* pe = nullptr;  // base positional encodings, total_nodes x K
  const EncoderConfig* cfg = nullptr;
  const LiftedParams* params = nullptr;
  const BatchWiring* wiring = nullptr;
  const PerturbationPlan* plan = nullptr;
  ModelAugKind model_kind = ModelAugKind::identity;
  double model_ratio = 0.0;
  DataAugSpec spec_a;
  DataAugSpec spec_b;
  const MaeLiteModel* mae = nullptr;  // required when a spec is generative
  StructuralDropCounts* drop_counts = nullptr;  // optional accounting
};

// One data-side view ready to feed the encoder.
struct DataView {
  Var features;
  Var pe;
  std::vector<int> keep_mask;  // selective masking only; empty otherwise
};

DataView apply_data_view(Tape& tape, const GraphBatch& batch, const Matrix& pe,
                         const DataAugSpec& spec, const LiftedParams& params,
                         const MaeLiteModel* mae, RngStream& rng);

// Builds the views the mode needs and projects them. RNG order is fixed:
// view-A draws, then view-B draws (when used), then structural bits for z2,
// then for z4 (when used) — keeping runs bitwise reproducible.
FourViewEmbeddings four_view_forward(Tape& tape, const ForwardContext& ctx,
                                     TrainMode mode, RngStream& rng);

// Total loss plus the realized values of the four canonical groups (a
// group a mode does not compute reports 0). Group losses are averaged over
// anchors within a group and summed across groups.
struct MultiViewLoss {
  Var total;
  double g12 = 0.0;
  double g34 = 0.0;
  double g13 = 0.0;
  double g24 = 0.0;
};

MultiViewLoss multi_view_loss(Tape& tape, const FourViewEmbeddings& views,
                              double temperature, TrainMode mode);

}  // namespace grapple
