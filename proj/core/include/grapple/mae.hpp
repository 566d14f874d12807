#pragma once

#include <vector>

#include "grapple/graph.hpp"
#include "grapple/matrix.hpp"
#include "grapple/params.hpp"
#include "grapple/rng.hpp"

namespace grapple {

// Small masked-autoencoder used by the generative data augmentation: a
// one-layer GIN-style encoder (d -> d_E), a one-layer GIN-style decoder
// (d_E -> d), a learnable mask token (input side) and remask token (hidden
// side). Parameter names: mae.enc.w/b, mae.dec.w/b, mae.mask, mae.remask.
struct MaeLiteModel {
  int feature_dim = 0;
  int hidden_dim = 64;
  ParamStore params;
};

MaeLiteModel make_mae_model(int feature_dim, int hidden_dim, RngStream& rng);

// Per graph, ceil(rate * n) distinct node rows chosen uniformly without
// replacement; returned ascending. rate = 0 selects nothing.
std::vector<int> sample_node_subset(const GraphBatch& batch, double rate,
                                    RngStream& rng);

// Mask -> encode -> remask -> decode at value level: rows in `rows` are
// replaced by the mask token before encoding and by the remask token after
// it; returns the decoded feature grid (total_nodes x d).
Matrix mae_reconstruct(const MaeLiteModel& model, const GraphBatch& batch,
                       const std::vector<int>& rows);

struct MaePretrainStats {
  int epochs = 0;
  double first_epoch_loss = 0.0;
  double last_epoch_loss = 0.0;
};

// Trains the model in place on the dataset with a scaled cosine error
// (exponent 2) over the masked rows. epochs = 0 is a no-op that leaves the
// model bitwise at initialization.
MaePretrainStats pretrain_mae(MaeLiteModel& model, const Dataset& dataset,
                              double mask_ratio, int epochs, int batch_size,
                              double lr, RngStream& rng);

// Replaces the feature rows of a sampled per-graph subset (rate p) with
// their reconstructions; all other rows are returned bit-identical.
// replaced_out, when non-null, receives the ascending replaced row list.
Matrix generative_augment(const GraphBatch& batch, const MaeLiteModel& model,
                          double p, RngStream& rng,
                          std::vector<int>* replaced_out = nullptr);

// Injected-subset form used by tests.
Matrix generative_augment_rows(const GraphBatch& batch,
                               const MaeLiteModel& model,
                               const std::vector<int>& rows);

// Persistence in the shared checkpoint container (dims travel in the
// config text block).
struct Checkpoint;
Checkpoint mae_to_checkpoint(const MaeLiteModel& model);
MaeLiteModel mae_from_checkpoint(const Checkpoint& ckpt);

}  // namespace grapple
