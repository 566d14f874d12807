#pragma once

#include <string>
#include <vector>

#include "grapple/contrastive.hpp"
#include "grapple/encoder.hpp"
#include "grapple/graph.hpp"
#include "grapple/params.hpp"

namespace grapple {

// Pretraining hyperparameters. validate() also normalizes the mode
// interactions: data-only forces an identity perturbation plan, and
// model-only forces the identity data augmentation on the side it uses.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;          // one of {8, 16, 32, 128}
  double learning_rate = 1e-3;  // one of {1e-3, 5e-4, 2.5e-4}
  double temperature = 0.2;     // NT-Xent temperature
  TrainMode mode = TrainMode::dual;
  DataAugSpec data_a;
  DataAugSpec data_b;
  ModelAugKind model_kind = ModelAugKind::identity;
  double model_ratio = 0.2;
  double sigma_scale = 0.1;  // gaussian-noise baseline spread factor
  unsigned long long seed = 1;
  int checkpoint_every = 10;
  // Reconstruction-model pretraining (used when a data spec is generative).
  double mae_mask_ratio = 0.2;
  int mae_epochs = 50;
  int mae_hidden_dim = 64;

  void validate_and_normalize();
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double g12 = 0.0, g34 = 0.0, g13 = 0.0, g24 = 0.0;
  long long wall_ms = 0;
};

struct PretrainArtifacts {
  std::vector<EpochRecord> records;
  std::vector<std::pair<int, std::string>> checkpoints;  // epoch -> path
  std::string final_checkpoint;
  std::string metric_log;
  std::string plan_log;
  ParamStore params;  // final parameter state
};

// Deterministic batching: graphs in `order` are cut into batch_size chunks;
// a trailing single-graph chunk is merged into the previous one because the
// loss needs at least two graphs.
std::vector<std::vector<int>> make_batch_index_chunks(int count, int batch_size);

// Runs the four-view contrastive pretraining loop and writes its artifacts
// under out_dir: checkpoints/epoch_NNNN.ckpt (epoch 0, every
// checkpoint_every epochs, and the final epoch), logs/metrics.csv with one
// "epoch,mean_loss,g12,g34,g13,g24,wall_ms" line per epoch, and
// logs/plan.csv with one "epoch,pruned_weights,dropped_layers,dropped_heads"
// line per epoch. config_text is embedded verbatim in every checkpoint.
PretrainArtifacts pretrain(const Dataset& dataset, const TrainConfig& tcfg,
                           EncoderConfig ecfg, const std::string& out_dir,
                           const std::string& config_text);

}  // namespace grapple
