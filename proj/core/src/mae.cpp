#include "grapple/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "grapple/checkpoint.hpp"
#include "grapple/error.hpp"
#include "grapple/optim.hpp"
#include "grapple/tape.hpp"

namespace grapple {

namespace {
// Guard for cosine denominators; reconstruction rows are practically never
// exact zeros, but the loss must stay defined if one is.
constexpr double kCosineEps = 1e-12;

struct MaeVars {
  Var enc_w, enc_b, dec_w, dec_b, mask_token, remask_token;
};

MaeVars lift(Tape& tape, const MaeLiteModel& model, bool requires_grad) {
  MaeVars v;
  v.enc_w = tape.leaf(model.params.at("mae.enc.w"), requires_grad);
  v.enc_b = tape.leaf(model.params.at("mae.enc.b"), requires_grad);
  v.dec_w = tape.leaf(model.params.at("mae.dec.w"), requires_grad);
  v.dec_b = tape.leaf(model.params.at("mae.dec.b"), requires_grad);
  v.mask_token = tape.leaf(model.params.at("mae.mask"), requires_grad);
  v.remask_token = tape.leaf(model.params.at("mae.remask"), requires_grad);
  return v;
}

Var gin_agg(Tape& tape, Var y, const GraphBatch& batch) {
  if (batch.edges.empty()) return y;
  std::vector<int> src, dst;
  src.reserve(batch.edges.size());
  dst.reserve(batch.edges.size());
  for (auto [u, v] : batch.edges) {
    src.push_back(u);
    dst.push_back(v);
  }
  return tape.add(y, tape.scatter_add_rows(tape.gather_rows(y, src), dst,
                                           batch.total_nodes));
}

// Replaces the rows flagged by `indicator` (n x 1 of 0/1) with the given
// 1 x d token: y * keep_rows + indicator * token.
Var replace_rows(Tape& tape, Var y, const Matrix& indicator, Var token) {
  const int d = tape.val(y).cols;
  Matrix keep(tape.val(y).rows, d, 1.0);
  for (int i = 0; i < keep.rows; ++i)
    if (indicator.at(i, 0) != 0.0)
      for (int j = 0; j < d; ++j) keep.at(i, j) = 0.0;
  return tape.add(tape.mul(y, tape.constant(keep)),
                  tape.matmul(tape.constant(indicator), token));
}

// Mask -> encode -> remask -> decode; returns the decoded grid.
Var mae_forward(Tape& tape, const MaeVars& v, const GraphBatch& batch,
                Var features, const std::vector<int>& rows) {
  Matrix indicator(batch.total_nodes, 1);
  for (int r : rows) {
    check(r >= 0 && r < batch.total_nodes, "mae: masked row out of range");
    indicator.at(r, 0) = 1.0;
  }
  Var masked = replace_rows(tape, features, indicator, v.mask_token);
  Var hidden = tape.relu(tape.add(tape.matmul(gin_agg(tape, masked, batch), v.enc_w),
                                  tape.broadcast_row(v.enc_b, batch.total_nodes)));
  Var remasked = replace_rows(tape, hidden, indicator, v.remask_token);
  return tape.add(tape.matmul(gin_agg(tape, remasked, batch), v.dec_w),
                  tape.broadcast_row(v.dec_b, batch.total_nodes));
}

// Scaled cosine error with exponent 2 over the selected rows.
Var sce_loss(Tape& tape, Var decoded, const Matrix& target,
             const std::vector<int>& rows) {
  check(!rows.empty(), "mae: loss needs at least one masked row");
  Var rec = tape.gather_rows(decoded, rows);
  Matrix tgt = gather_rows(target, rows);
  Var num = tape.sum_rows(tape.mul(rec, tape.constant(tgt)));
  Matrix tgt_norm = l2norm_rows(tgt);
  Var den = tape.add_scalar(
      tape.mul(tape.l2norm_rows(rec), tape.constant(tgt_norm)), kCosineEps);
  Var one_minus = tape.sub(tape.constant(Matrix::ones(static_cast<int>(rows.size()), 1)),
                           tape.div(num, den));
  return tape.mean_all(tape.mul(one_minus, one_minus));
}
}  // namespace

MaeLiteModel make_mae_model(int feature_dim, int hidden_dim, RngStream& rng) {
  check(feature_dim >= 1, "mae: feature_dim must be positive");
  check(hidden_dim >= 1, "mae: hidden_dim must be positive");
  MaeLiteModel m;
  m.feature_dim = feature_dim;
  m.hidden_dim = hidden_dim;
  m.params.add("mae.enc.w", init_weight(feature_dim, hidden_dim, rng));
  m.params.add("mae.enc.b", Matrix::zeros(1, hidden_dim));
  m.params.add("mae.dec.w", init_weight(hidden_dim, feature_dim, rng));
  m.params.add("mae.dec.b", Matrix::zeros(1, feature_dim));
  m.params.add("mae.mask", Matrix::zeros(1, feature_dim));
  m.params.add("mae.remask", Matrix::zeros(1, hidden_dim));
  return m;
}

std::vector<int> sample_node_subset(const GraphBatch& batch, double rate,
                                    RngStream& rng) {
  check(rate >= 0.0 && rate <= 1.0, "sample_node_subset: rate must lie in [0,1]");
  std::vector<int> rows;
  for (int g = 0; g < batch.num_graphs; ++g) {
    const int n = batch.graph_sizes[g];
    const int k = static_cast<int>(std::ceil(rate * n));
    if (k <= 0) continue;
    std::vector<int> local(n);
    std::iota(local.begin(), local.end(), batch.graph_begin(g));
    rng.shuffle(local);
    rows.insert(rows.end(), local.begin(), local.begin() + k);
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

Matrix mae_reconstruct(const MaeLiteModel& model, const GraphBatch& batch,
                       const std::vector<int>& rows) {
  check(batch.node_features.cols == model.feature_dim,
        "mae: batch feature width != model feature_dim");
  Tape tape;
  MaeVars v = lift(tape, model, /*requires_grad=*/false);
  Var decoded = mae_forward(tape, v, batch, tape.constant(batch.node_features), rows);
  return tape.val(decoded);
}

MaePretrainStats pretrain_mae(MaeLiteModel& model, const Dataset& dataset,
                              double mask_ratio, int epochs, int batch_size,
                              double lr, RngStream& rng) {
  check(!dataset.graphs.empty(), "mae: dataset is empty");
  check(mask_ratio > 0.0 && mask_ratio < 1.0, "mae: mask_ratio must lie in (0,1)");
  check(epochs >= 0, "mae: epochs must be nonnegative");
  check(batch_size >= 1, "mae: batch_size must be positive");
  check(dataset.feature_dim == model.feature_dim,
        "mae: dataset feature width != model feature_dim");

  AdamState adam;
  adam.learning_rate = lr;
  MaePretrainStats stats;
  stats.epochs = epochs;

  std::vector<int> order(dataset.graphs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<Graph> chunk;
      for (size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
        chunk.push_back(dataset.graphs[order[i]]);
      GraphBatch batch = batch_graphs(chunk);
      std::vector<int> rows = sample_node_subset(batch, mask_ratio, rng);
      check(!rows.empty(), "mae: mask_ratio selected zero nodes in every graph");

      Tape tape;
      MaeVars v = lift(tape, model, /*requires_grad=*/true);
      Var decoded =
          mae_forward(tape, v, batch, tape.constant(batch.node_features), rows);
      Var loss = sce_loss(tape, decoded, batch.node_features, rows);
      tape.backward(loss);
      std::vector<Matrix> grads = {
          tape.grad(v.enc_w),      tape.grad(v.enc_b), tape.grad(v.dec_w),
          tape.grad(v.dec_b),      tape.grad(v.mask_token),
          tape.grad(v.remask_token)};
      adam_step(model.params, grads, adam);
      loss_sum += tape.val(loss).scalar();
      ++steps;
    }
    const double mean_loss = loss_sum / steps;
    if (epoch == 0) stats.first_epoch_loss = mean_loss;
    stats.last_epoch_loss = mean_loss;
  }
  return stats;
}

Matrix generative_augment(const GraphBatch& batch, const MaeLiteModel& model,
                          double p, RngStream& rng,
                          std::vector<int>* replaced_out) {
  check(p >= 0.0 && p <= 1.0, "generative_augment: p must lie in [0,1]");
  std::vector<int> rows =
      p == 0.0 ? std::vector<int>{} : sample_node_subset(batch, p, rng);
  if (replaced_out) *replaced_out = rows;
  return generative_augment_rows(batch, model, rows);
}

Matrix generative_augment_rows(const GraphBatch& batch,
                               const MaeLiteModel& model,
                               const std::vector<int>& rows) {
  if (rows.empty()) return batch.node_features;
  Matrix decoded = mae_reconstruct(model, batch, rows);
  Matrix out = batch.node_features;
  for (int r : rows)
    for (int j = 0; j < out.cols; ++j) out.at(r, j) = decoded.at(r, j);
  return out;
}

Checkpoint mae_to_checkpoint(const MaeLiteModel& model) {
  Checkpoint ckpt;
  std::ostringstream cfg;
  cfg << "mae feature_dim=" << model.feature_dim
      << " hidden_dim=" << model.hidden_dim << "\n";
  ckpt.config_text = cfg.str();
  ckpt.params = model.params;
  return ckpt;
}

MaeLiteModel mae_from_checkpoint(const Checkpoint& ckpt) {
  std::istringstream cfg(ckpt.config_text);
  std::string tag, f_kv, h_kv;
  cfg >> tag >> f_kv >> h_kv;
  check(tag == "mae" && f_kv.rfind("feature_dim=", 0) == 0 &&
            h_kv.rfind("hidden_dim=", 0) == 0,
        "mae: checkpoint config block is not a reconstruction model");
  MaeLiteModel model;
  model.feature_dim = std::stoi(f_kv.substr(f_kv.find('=') + 1));
  model.hidden_dim = std::stoi(h_kv.substr(h_kv.find('=') + 1));
  model.params = ckpt.params;
  for (const char* name : {"mae.enc.w", "mae.enc.b", "mae.dec.w", "mae.dec.b",
                           "mae.mask", "mae.remask"})
    check(model.params.has(name),
          std::string("mae: checkpoint missing parameter '") + name + "'");
  check(model.params.at("mae.enc.w").rows == model.feature_dim &&
            model.params.at("mae.enc.w").cols == model.hidden_dim,
        "mae: checkpoint grid shapes disagree with its config block");
  return model;
}

}  // namespace grapple
