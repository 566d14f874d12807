#pragma once

#include <vector>

#include "grapple/metrics.hpp"

namespace grapple {

// Linear-probe evaluation: stratified k-fold cross-validation of an
// L2-regularized multinomial logistic regression trained by full-batch
// gradient descent on row-normalized embeddings. The inverse
// regularization strength C is picked per outer fold by an inner
// cross-validation on the training portion (ties resolved toward the
// smaller C); the weight penalty is lambda/2 * ||W||^2 with
// lambda = 1 / (C * train_count).
struct ProbeConfig {
  int folds = 10;
  int inner_folds = 5;
  std::vector<unsigned long long> seeds = {0, 1, 2, 3, 4};
  std::vector<double> c_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  int gd_steps = 500;
  double gd_lr = 0.1;
  void validate() const;
};

struct ProbeResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;            // population std over per-seed means
  std::vector<double> per_seed;         // mean over folds, one per seed
  std::vector<std::vector<double>> per_seed_fold;  // [seed][fold] accuracy
};

ProbeResult linear_probe_cv(const EmbeddingTable& table, const ProbeConfig& cfg);

// Building blocks exposed for tests.

// Per class: shuffle that class's indices with the seed, then deal them
// round-robin across folds. Every fold's training complement must contain
// every class, otherwise the split is rejected.
std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels,
                                               int num_classes, int folds,
                                               unsigned long long seed);

// Trained probe weights: the last row is the bias (inputs are augmented
// with a constant-1 column internally; the bias row is not regularized).
Matrix train_logreg(const Matrix& features, const std::vector<int>& labels,
                    int num_classes, double lambda, int steps, double lr);

double logreg_accuracy(const Matrix& weights, const Matrix& features,
                       const std::vector<int>& labels);

}  // namespace grapple
