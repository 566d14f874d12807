#pragma once

#include <utility>
#include <vector>

#include "grapple/checkpoint.hpp"
#include "grapple/encoder.hpp"
#include "grapple/graph.hpp"
#include "grapple/mae.hpp"
#include "grapple/matrix.hpp"
#include "grapple/trainer.hpp"

namespace grapple {

// Row-wise L2 normalization; rejects zero rows (a zero embedding has no
// direction to measure).
Matrix normalize_rows(const Matrix& m);

// Mean over aligned pairs of ||a_i - b_i||^alpha on normalized rows.
// Lower = positives sit closer.
double alignment(const Matrix& views_a, const Matrix& views_b, double alpha = 2.0);

// log of the mean over ordered distinct pairs (i != j) of
// exp(-beta * ||v_i - v_j||^beta) on normalized rows. Lower = more spread.
double uniformity(const Matrix& views, double beta = 2.0);

// Frozen readout representations (pre-projection h) under identity
// augmentation and identity plan.
struct EmbeddingTable {
  Matrix rows;              // M x d
  std::vector<int> labels;  // length M
  int num_classes = 0;
};

EmbeddingTable embed_dataset(const Dataset& dataset, const ParamStore& params,
                             EncoderConfig ecfg);

struct TrajectoryPoint {
  int epoch = 0;
  double alignment = 0.0;
  double uniformity = 0.0;
};

// Per checkpoint (epoch-ascending series): rebuild the run's paired views —
// data view A through the unperturbed encoder, data view B through the
// perturbed one — then measure alignment on the pairs and uniformity on
// the pooled stack of both views' readouts. The RNG restarts from the same
// seed for every checkpoint so the augmentation draws are held fixed and
// the trajectory isolates the effect of training.
std::vector<TrajectoryPoint> alignment_uniformity_trajectory(
    const Dataset& dataset, const std::vector<std::pair<int, Checkpoint>>& series,
    const TrainConfig& tcfg, EncoderConfig ecfg, const MaeLiteModel* mae,
    unsigned long long seed);

}  // namespace grapple
