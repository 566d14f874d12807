#include "grapple/probe.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "grapple/error.hpp"
#include "grapple/rng.hpp"

namespace grapple {

namespace {

constexpr uint64_t kStreamProbe = 21;

// One shuffled list of row indices per class. One shuffle per class, in
// class order, so the draw sequence is a deterministic function of the seed.
std::vector<std::vector<int>> shuffled_class_lists(const std::vector<int>& labels,
                                                   int num_classes, RngStream& rng) {
  std::vector<std::vector<int>> lists(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < labels.size(); ++i) {
    int c = labels[i];
    check(c >= 0 && c < num_classes,
          "probe: label " + std::to_string(c) + " outside [0, " +
              std::to_string(num_classes) + ")");
    lists[static_cast<size_t>(c)].push_back(static_cast<int>(i));
  }
  for (auto& list : lists) rng.shuffle(list);
  return lists;
}

// Deal each class's (already shuffled) list round-robin across folds.
std::vector<std::vector<int>> deal_round_robin(
    const std::vector<std::vector<int>>& class_lists, int folds) {
  std::vector<std::vector<int>> out(static_cast<size_t>(folds));
  for (const auto& list : class_lists) {
    for (size_t i = 0; i < list.size(); ++i) {
      out[i % static_cast<size_t>(folds)].push_back(list[i]);
    }
  }
  return out;
}

// Row-normalize a copy of the embeddings. Unlike the diagnostics, the probe
// tolerates zero rows (they stay zero) because it has no geometric meaning to
// preserve, only a scale to remove.
Matrix normalized_features(const Matrix& rows) {
  Matrix out = rows;
  for (int r = 0; r < out.rows; ++r) {
    double ss = 0.0;
    for (int c = 0; c < out.cols; ++c) ss += out.at(r, c) * out.at(r, c);
    double denom = std::max(std::sqrt(ss), 1e-12);
    for (int c = 0; c < out.cols; ++c) out.at(r, c) /= denom;
  }
  return out;
}

// Append a constant-1 column so the bias can live as the last weight row.
Matrix augment_ones(const Matrix& x) {
  Matrix out(x.rows, x.cols + 1);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) out.at(r, c) = x.at(r, c);
    out.at(r, x.cols) = 1.0;
  }
  return out;
}

Matrix take_rows(const Matrix& x, const std::vector<int>& idx) {
  Matrix out(static_cast<int>(idx.size()), x.cols);
  for (size_t r = 0; r < idx.size(); ++r) {
    for (int c = 0; c < x.cols; ++c) {
      out.at(static_cast<int>(r), c) = x.at(idx[r], c);
    }
  }
  return out;
}

std::vector<int> take_labels(const std::vector<int>& labels,
                             const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (size_t r = 0; r < idx.size(); ++r) out[r] = labels[static_cast<size_t>(idx[r])];
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void ProbeConfig::validate() const {
  check(folds >= 2, "probe: folds must be >= 2, got " + std::to_string(folds));
  check(inner_folds >= 2,
        "probe: inner_folds must be >= 2, got " + std::to_string(inner_folds));
  check(!seeds.empty(), "probe: seeds must be non-empty");
  check(!c_grid.empty(), "probe: c_grid must be non-empty");
  for (double c : c_grid) {
    check(std::isfinite(c) && c > 0.0, "probe: c_grid values must be positive");
  }
  check(gd_steps >= 1, "probe: gd_steps must be >= 1");
  check(std::isfinite(gd_lr) && gd_lr > 0.0, "probe: gd_lr must be positive");
}

std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels,
                                               int num_classes, int folds,
                                               unsigned long long seed) {
  check(num_classes >= 2, "probe: need at least 2 classes");
  check(folds >= 2, "probe: folds must be >= 2");
  RngStream rng(seed, kStreamProbe);
  return deal_round_robin(shuffled_class_lists(labels, num_classes, rng), folds);
}

Matrix train_logreg(const Matrix& features, const std::vector<int>& labels,
                    int num_classes, double lambda, int steps, double lr) {
  check(features.rows == static_cast<int>(labels.size()),
        "probe: feature/label count mismatch");
  check(features.rows >= 1, "probe: cannot fit on an empty training set");
  const int m = features.rows;
  const Matrix x = augment_ones(features);
  Matrix onehot = Matrix::zeros(m, num_classes);
  for (int r = 0; r < m; ++r) onehot.at(r, labels[static_cast<size_t>(r)]) = 1.0;

  Matrix w = Matrix::zeros(x.cols, num_classes);
  for (int step = 0; step < steps; ++step) {
    Matrix p = softmax_rows(matmul(x, w));
    Matrix diff = scale(sub(p, onehot), 1.0 / static_cast<double>(m));
    Matrix grad = matmul_tn(x, diff);
    // The bias row (last) is excluded from the L2 penalty.
    for (int r = 0; r + 1 < w.rows; ++r) {
      for (int c = 0; c < num_classes; ++c) grad.at(r, c) += lambda * w.at(r, c);
    }
    w = sub(w, scale(grad, lr));
  }
  check(w.all_finite(), "probe: non-finite weights after gradient descent");
  return w;
}

double logreg_accuracy(const Matrix& weights, const Matrix& features,
                       const std::vector<int>& labels) {
  check(features.rows == static_cast<int>(labels.size()),
        "probe: feature/label count mismatch");
  check(features.rows >= 1, "probe: cannot score an empty evaluation set");
  check(weights.rows == features.cols + 1,
        "probe: weight rows must equal feature dim + 1 (bias)");
  const Matrix scores = matmul(augment_ones(features), weights);
  int hits = 0;
  for (int r = 0; r < scores.rows; ++r) {
    int best = 0;
    for (int c = 1; c < scores.cols; ++c) {
      if (scores.at(r, c) > scores.at(r, best)) best = c;  // tie -> lower index
    }
    if (best == labels[static_cast<size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows);
}

ProbeResult linear_probe_cv(const EmbeddingTable& table, const ProbeConfig& cfg) {
  cfg.validate();
  check(table.rows.rows == static_cast<int>(table.labels.size()),
        "probe: embedding/label count mismatch");
  check(table.num_classes >= 2, "probe: need at least 2 classes");
  check(table.rows.rows >= cfg.folds,
        "probe: fewer rows than folds (" + std::to_string(table.rows.rows) + " < " +
            std::to_string(cfg.folds) + ")");

  const Matrix x = normalized_features(table.rows);

  ProbeResult result;
  result.per_seed.reserve(cfg.seeds.size());
  result.per_seed_fold.reserve(cfg.seeds.size());

  for (unsigned long long seed : cfg.seeds) {
    RngStream rng(seed, kStreamProbe);
    const auto class_lists =
        shuffled_class_lists(table.labels, table.num_classes, rng);
    const auto outer = deal_round_robin(class_lists, cfg.folds);

    std::vector<double> fold_acc;
    fold_acc.reserve(static_cast<size_t>(cfg.folds));
    for (int f = 0; f < cfg.folds; ++f) {
      // Training portion per class, keeping the shuffled order so the inner
      // deal below needs no further randomness.
      std::vector<std::vector<int>> train_lists(class_lists.size());
      std::vector<int> train_idx;
      for (size_t c = 0; c < class_lists.size(); ++c) {
        for (size_t i = 0; i < class_lists[c].size(); ++i) {
          if (static_cast<int>(i % static_cast<size_t>(cfg.folds)) == f) continue;
          train_lists[c].push_back(class_lists[c][i]);
          train_idx.push_back(class_lists[c][i]);
        }
        check(!train_lists[c].empty(),
              "probe: stratification failed: class " + std::to_string(c) +
                  " absent from the training portion of fold " + std::to_string(f) +
                  " (seed " + std::to_string(seed) + ")");
      }

      // Inner cross-validation to pick C (ties go to the smaller value).
      const auto inner = deal_round_robin(train_lists, cfg.inner_folds);
      double best_c = cfg.c_grid.front();
      double best_acc = -1.0;
      for (double c_value : cfg.c_grid) {
        std::vector<double> inner_acc;
        inner_acc.reserve(static_cast<size_t>(cfg.inner_folds));
        for (int j = 0; j < cfg.inner_folds; ++j) {
          std::vector<int> fit_idx;
          for (int k = 0; k < cfg.inner_folds; ++k) {
            if (k == j) continue;
            fit_idx.insert(fit_idx.end(), inner[static_cast<size_t>(k)].begin(),
                           inner[static_cast<size_t>(k)].end());
          }
          if (fit_idx.empty() || inner[static_cast<size_t>(j)].empty()) continue;
          const Matrix xf = take_rows(x, fit_idx);
          const auto yf = take_labels(table.labels, fit_idx);
          const double lambda = 1.0 / (c_value * static_cast<double>(fit_idx.size()));
          const Matrix w = train_logreg(xf, yf, table.num_classes, lambda,
                                        cfg.gd_steps, cfg.gd_lr);
          inner_acc.push_back(
              logreg_accuracy(w, take_rows(x, inner[static_cast<size_t>(j)]),
                              take_labels(table.labels, inner[static_cast<size_t>(j)])));
        }
        check(!inner_acc.empty(), "probe: no usable inner folds");
        const double acc = mean_of(inner_acc);
        if (acc > best_acc) {
          best_acc = acc;
          best_c = c_value;
        }
      }

      // Refit on the full training portion with the selected C.
      const Matrix xt = take_rows(x, train_idx);
      const auto yt = take_labels(table.labels, train_idx);
      const double lambda = 1.0 / (best_c * static_cast<double>(train_idx.size()));
      const Matrix w = train_logreg(xt, yt, table.num_classes, lambda,
                                    cfg.gd_steps, cfg.gd_lr);
      check(!outer[static_cast<size_t>(f)].empty(),
            "probe: fold " + std::to_string(f) + " is empty");
      fold_acc.push_back(
          logreg_accuracy(w, take_rows(x, outer[static_cast<size_t>(f)]),
                          take_labels(table.labels, outer[static_cast<size_t>(f)])));
    }

    result.per_seed_fold.push_back(fold_acc);
    result.per_seed.push_back(mean_of(fold_acc));
  }

  result.mean_accuracy = mean_of(result.per_seed);
  double var = 0.0;
  for (double v : result.per_seed) {
    var += (v - result.mean_accuracy) * (v - result.mean_accuracy);
  }
  var /= static_cast<double>(result.per_seed.size());
  result.std_accuracy = std::sqrt(var);
  return result;
}

}  // namespace grapple
