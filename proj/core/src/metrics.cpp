#include "grapple/metrics.hpp"

#include <cmath>

#include "grapple/error.hpp"
#include "grapple/rwse.hpp"

namespace grapple {

namespace {
constexpr unsigned long long kStreamTrajectory = 16;
constexpr int kEmbedChunk = 32;

Matrix vstack(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  check(a.cols == b.cols, "vstack: column mismatch");
  Matrix out(a.rows + b.rows, a.cols);
  std::copy(a.a.begin(), a.a.end(), out.a.begin());
  std::copy(b.a.begin(), b.a.end(), out.a.begin() + a.a.size());
  return out;
}

// Fixed dataset-order chunking shared by embedding and the trajectory.
std::vector<std::vector<const Graph*>> dataset_chunks(const Dataset& dataset) {
  std::vector<std::vector<const Graph*>> chunks;
  for (size_t start = 0; start < dataset.graphs.size(); start += kEmbedChunk) {
    std::vector<const Graph*> chunk;
    for (size_t i = start; i < std::min(dataset.graphs.size(), start + kEmbedChunk); ++i)
      chunk.push_back(&dataset.graphs[i]);
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

GraphBatch batch_of(const std::vector<const Graph*>& chunk) {
  std::vector<Graph> graphs;
  graphs.reserve(chunk.size());
  for (const Graph* g : chunk) graphs.push_back(*g);
  return batch_graphs(graphs);
}
}  // namespace

Matrix normalize_rows(const Matrix& m) {
  Matrix norms = l2norm_rows(m);
  Matrix out = m;
  for (int i = 0; i < m.rows; ++i) {
    const double n = norms.at(i, 0);
    check(n > 0.0, "normalize_rows: row " + std::to_string(i) + " has zero norm");
    for (int j = 0; j < m.cols; ++j) out.at(i, j) /= n;
  }
  return out;
}

double alignment(const Matrix& views_a, const Matrix& views_b, double alpha) {
  check(views_a.rows == views_b.rows && views_a.cols == views_b.cols,
        "alignment: view tables must have matching shapes");
  check(views_a.rows >= 1, "alignment: need at least one pair");
  Matrix na = normalize_rows(views_a);
  Matrix nb = normalize_rows(views_b);
  double sum = 0.0;
  for (int i = 0; i < na.rows; ++i) {
    double ss = 0.0;
    for (int j = 0; j < na.cols; ++j) {
      const double d = na.at(i, j) - nb.at(i, j);
      ss += d * d;
    }
    sum += alpha == 2.0 ? ss : std::pow(std::sqrt(ss), alpha);
  }
  return sum / na.rows;
}

double uniformity(const Matrix& views, double beta) {
  check(views.rows >= 2, "uniformity: need at least two rows");
  Matrix nv = normalize_rows(views);
  double sum = 0.0;
  long long pairs = 0;
  for (int i = 0; i < nv.rows; ++i) {
    for (int j = 0; j < nv.rows; ++j) {
      if (i == j) continue;
      double ss = 0.0;
      for (int k = 0; k < nv.cols; ++k) {
        const double d = nv.at(i, k) - nv.at(j, k);
        ss += d * d;
      }
      const double dist_pow = beta == 2.0 ? ss : std::pow(std::sqrt(ss), beta);
      sum += std::exp(-beta * dist_pow);
      ++pairs;
    }
  }
  return std::log(sum / pairs);
}

EmbeddingTable embed_dataset(const Dataset& dataset, const ParamStore& params,
                             EncoderConfig ecfg) {
  check(!dataset.graphs.empty(), "embed: dataset is empty");
  check(ecfg.input_dim == dataset.feature_dim,
        "embed: checkpoint input width " + std::to_string(ecfg.input_dim) +
            " != dataset feature width " + std::to_string(dataset.feature_dim));
  ecfg.validate();

  EmbeddingTable table;
  table.rows = Matrix(static_cast<int>(dataset.graphs.size()), ecfg.hidden_dim);
  table.num_classes = dataset.num_classes;
  const PerturbationPlan identity_plan;
  int next_row = 0;
  for (const auto& chunk : dataset_chunks(dataset)) {
    GraphBatch batch = batch_of(chunk);
    Matrix pe = compute_rwse_batch(batch, ecfg.pe_dim);
    BatchWiring wiring = build_wiring(batch);
    Tape tape;
    LiftedParams lifted = lift_params(tape, params, /*requires_grad=*/false);
    EncodeResult r = encode_batch(tape, batch, tape.constant(batch.node_features),
                                  tape.constant(pe), ecfg, lifted, wiring,
                                  identity_plan);
    const Matrix& reps = tape.val(r.graph_reps);
    for (int g = 0; g < reps.rows; ++g, ++next_row) {
      check(chunk[g]->label >= 0, "embed: graph without a class label");
      table.labels.push_back(chunk[g]->label);
      for (int j = 0; j < reps.cols; ++j) table.rows.at(next_row, j) = reps.at(g, j);
    }
  }
  check(table.rows.all_finite(), "embed: non-finite representation produced");
  return table;
}

std::vector<TrajectoryPoint> alignment_uniformity_trajectory(
    const Dataset& dataset, const std::vector<std::pair<int, Checkpoint>>& series,
    const TrainConfig& tcfg_in, EncoderConfig ecfg, const MaeLiteModel* mae,
    unsigned long long seed) {
  check(!series.empty(), "trajectory: need at least one checkpoint");
  for (size_t i = 1; i < series.size(); ++i)
    check(series[i - 1].first < series[i].first,
          "trajectory: checkpoints must be in ascending epoch order");
  TrainConfig tcfg = tcfg_in;
  tcfg.validate_and_normalize();
  ecfg.input_dim = dataset.feature_dim;
  ecfg.validate();

  std::vector<TrajectoryPoint> points;
  for (const auto& [epoch, ckpt] : series) {
    // Same stream per checkpoint: augmentation draws are held fixed across
    // the series.
    RngStream rng(seed, kStreamTrajectory);

    PerturbationPlan plan;
    if (tcfg.model_kind == ModelAugKind::weight_prune) {
      plan.weight_masks = build_weight_prune_mask(
          ckpt.params, perturbation_pool(ckpt.params), tcfg.model_ratio);
      plan.identity = false;
    } else if (tcfg.model_kind == ModelAugKind::gaussian_noise) {
      plan.noise_deltas = gaussian_noise_deltas(
          ckpt.params, perturbation_pool(ckpt.params), tcfg.sigma_scale, rng);
      plan.identity = false;
    }

    Matrix side_a, side_b;
    for (const auto& chunk : dataset_chunks(dataset)) {
      GraphBatch batch = batch_of(chunk);
      Matrix pe = compute_rwse_batch(batch, ecfg.pe_dim);
      BatchWiring wiring = build_wiring(batch);
      Tape tape;
      LiftedParams lifted = lift_params(tape, ckpt.params, /*requires_grad=*/false);
      DataView va = apply_data_view(tape, batch, pe, tcfg.data_a, lifted, mae, rng);
      DataView vb = apply_data_view(tape, batch, pe, tcfg.data_b, lifted, mae, rng);
      const PerturbationPlan no_plan;
      EncodeResult ra = encode_batch(tape, batch, va.features, va.pe, ecfg, lifted,
                                     wiring, no_plan);
      LiftedParams hat = apply_plan_weights(tape, lifted, plan);
      PerturbationPlan bits = plan;
      if (tcfg.model_kind == ModelAugKind::layer_drop) {
        bits.layer_keep_bits = sample_layer_bits(ecfg.num_layers, tcfg.model_ratio, rng);
        bits.identity = false;
      } else if (tcfg.model_kind == ModelAugKind::head_drop) {
        bits.head_keep_bits =
            sample_head_bits(ecfg.num_layers, ecfg.num_heads, tcfg.model_ratio, rng);
        bits.identity = false;
      }
      EncodeResult rb =
          encode_batch(tape, batch, vb.features, vb.pe, ecfg, hat, wiring, bits);
      side_a = vstack(side_a, tape.val(ra.graph_reps));
      side_b = vstack(side_b, tape.val(rb.graph_reps));
    }

    TrajectoryPoint pt;
    pt.epoch = epoch;
    pt.alignment = alignment(side_a, side_b);
    pt.uniformity = uniformity(vstack(side_a, side_b));
    points.push_back(pt);
  }
  return points;
}

}  // namespace grapple
