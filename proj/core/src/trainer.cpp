#include "grapple/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "grapple/checkpoint.hpp"
#include "grapple/error.hpp"
#include "grapple/optim.hpp"
#include "grapple/rwse.hpp"
#include "grapple/textio.hpp"

namespace grapple {

namespace {
// Fixed stream ids: every consumer of randomness gets its own stream so
// the draw order inside one consumer never depends on another.
enum : unsigned long long {
  kStreamInit = 11,
  kStreamShuffle = 12,
  kStreamAug = 13,
  kStreamPlan = 14,
  kStreamMae = 15,
};

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
  return buf;
}
}  // namespace

void TrainConfig::validate_and_normalize() {
  check(epochs >= 0, "train: epochs must be nonnegative");
  check(batch_size == 8 || batch_size == 16 || batch_size == 32 || batch_size == 128,
        "train: batch_size must be one of 8, 16, 32, 128");
  check(learning_rate == 1e-3 || learning_rate == 5e-4 || learning_rate == 2.5e-4,
        "train: learning_rate must be one of 1e-3, 5e-4, 2.5e-4");
  check(temperature > 0.0, "train: temperature must be positive");
  check(checkpoint_every >= 1, "train: checkpoint_every must be positive");
  check(model_ratio >= 0.0 && model_ratio < 1.0,
        "train: model_ratio must lie in [0,1)");
  check(sigma_scale > 0.0, "train: sigma_scale must be positive");
  data_a.validate();
  data_b.validate();
  if (mode == TrainMode::data_only) model_kind = ModelAugKind::identity;
  if (mode == TrainMode::model_only) data_a.kind = DataAugKind::identity;
  const bool generative = data_a.kind == DataAugKind::generative ||
                          data_b.kind == DataAugKind::generative;
  if (generative) {
    check(mae_mask_ratio > 0.0 && mae_mask_ratio < 1.0,
          "train: mae_mask_ratio must lie in (0,1)");
    check(mae_epochs >= 0, "train: mae_epochs must be nonnegative");
    check(mae_hidden_dim >= 1, "train: mae_hidden_dim must be positive");
  }
}

std::vector<std::vector<int>> make_batch_index_chunks(int count, int batch_size) {
  check(count >= 2, "train: need at least 2 graphs to form contrastive batches");
  check(batch_size >= 2, "train: batch_size must be at least 2");
  std::vector<std::vector<int>> chunks;
  for (int start = 0; start < count; start += batch_size) {
    const int end = std::min(count, start + batch_size);
    std::vector<int> chunk(end - start);
    std::iota(chunk.begin(), chunk.end(), start);
    chunks.push_back(std::move(chunk));
  }
  if (chunks.size() >= 2 && chunks.back().size() == 1) {
    chunks[chunks.size() - 2].push_back(chunks.back()[0]);
    chunks.pop_back();
  }
  return chunks;
}

PretrainArtifacts pretrain(const Dataset& dataset, const TrainConfig& tcfg_in,
                           EncoderConfig ecfg, const std::string& out_dir,
                           const std::string& config_text) {
  TrainConfig tcfg = tcfg_in;
  tcfg.validate_and_normalize();
  check(dataset.graphs.size() >= 2, "train: dataset must hold at least 2 graphs");
  ecfg.input_dim = dataset.feature_dim;
  ecfg.validate();

  namespace fs = std::filesystem;
  const fs::path ckpt_dir = fs::path(out_dir) / "checkpoints";
  const fs::path log_dir = fs::path(out_dir) / "logs";
  fs::create_directories(ckpt_dir);
  fs::create_directories(log_dir);

  RngStream rng_init(tcfg.seed, kStreamInit);
  RngStream rng_shuffle(tcfg.seed, kStreamShuffle);
  RngStream rng_aug(tcfg.seed, kStreamAug);
  RngStream rng_plan(tcfg.seed, kStreamPlan);

  ParamStore params;
  add_encoder_params(params, ecfg, rng_init);
  add_projection_params(params, ecfg, rng_init);
  add_scorer_params(params, ecfg, rng_init);
  AdamState adam;
  adam.learning_rate = tcfg.learning_rate;

  // Reconstruction model for the generative augmentation: trained once per
  // run on the pretraining corpus itself and cached beside the checkpoints.
  MaeLiteModel mae;
  bool has_mae = false;
  if (tcfg.data_a.kind == DataAugKind::generative ||
      tcfg.data_b.kind == DataAugKind::generative) {
    RngStream rng_mae(tcfg.seed, kStreamMae);
    mae = make_mae_model(dataset.feature_dim, tcfg.mae_hidden_dim, rng_mae);
    pretrain_mae(mae, dataset, tcfg.mae_mask_ratio, tcfg.mae_epochs,
                 tcfg.batch_size, tcfg.learning_rate, rng_mae);
    save_checkpoint((ckpt_dir / "mae.ckpt").string(), mae_to_checkpoint(mae));
    has_mae = true;
  }

  // Positional encodings are structural: computed once per graph.
  std::vector<Matrix> pe_per_graph;
  pe_per_graph.reserve(dataset.graphs.size());
  for (const Graph& g : dataset.graphs)
    pe_per_graph.push_back(compute_rwse(g, ecfg.pe_dim));

  auto rng_states = [&]() {
    std::string s;
    s += "shuffle=" + rng_shuffle.serialize() + "\n";
    s += "aug=" + rng_aug.serialize() + "\n";
    s += "plan=" + rng_plan.serialize() + "\n";
    return s;
  };
  auto save = [&](int epoch, bool with_adam) {
    Checkpoint ckpt;
    ckpt.config_text = config_text;
    ckpt.params = params;
    ckpt.has_adam = with_adam;
    if (with_adam) ckpt.adam = adam;
    ckpt.rng_state = rng_states();
    const std::string path = (ckpt_dir / checkpoint_name(epoch)).string();
    save_checkpoint(path, ckpt);
    return path;
  };

  PretrainArtifacts out;
  out.metric_log = (log_dir / "metrics.csv").string();
  out.plan_log = (log_dir / "plan.csv").string();
  std::ofstream metrics(out.metric_log, std::ios::trunc);
  std::ofstream plan_log(out.plan_log, std::ios::trunc);
  check(metrics.is_open(), "train: cannot open metric log for writing");
  check(plan_log.is_open(), "train: cannot open plan log for writing");

  out.checkpoints.emplace_back(0, save(0, /*with_adam=*/false));

  std::vector<int> order(dataset.graphs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::vector<std::vector<int>> chunks =
      make_batch_index_chunks(static_cast<int>(order.size()), tcfg.batch_size);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng_shuffle.shuffle(order);

    // Per-epoch plan: weight masks depend on the current parameters, the
    // gaussian baseline on the current spread; structural bits are drawn
    // per forward pass instead.
    PerturbationPlan plan;
    if (tcfg.model_kind == ModelAugKind::weight_prune) {
      plan.weight_masks =
          build_weight_prune_mask(params, perturbation_pool(params), tcfg.model_ratio);
      plan.identity = false;
    } else if (tcfg.model_kind == ModelAugKind::gaussian_noise) {
      plan.noise_deltas = gaussian_noise_deltas(params, perturbation_pool(params),
                                                tcfg.sigma_scale, rng_plan);
      plan.identity = false;
    }
    StructuralDropCounts drops;

    double loss_sum = 0.0, g12 = 0.0, g34 = 0.0, g13 = 0.0, g24 = 0.0;
    for (size_t b = 0; b < chunks.size(); ++b) {
      std::vector<Graph> graphs;
      std::vector<const Matrix*> pe_rows;
      for (int pos : chunks[b]) {
        graphs.push_back(dataset.graphs[order[pos]]);
        pe_rows.push_back(&pe_per_graph[order[pos]]);
      }
      GraphBatch batch = batch_graphs(graphs);
      Matrix pe(batch.total_nodes, ecfg.pe_dim);
      int row = 0;
      for (const Matrix* m : pe_rows)
        for (int i = 0; i < m->rows; ++i, ++row)
          for (int j = 0; j < m->cols; ++j) pe.at(row, j) = m->at(i, j);
      BatchWiring wiring = build_wiring(batch);

      Tape tape;
      LiftedParams lifted = lift_params(tape, params);
      ForwardContext ctx;
      ctx.batch = &batch;
      ctx.pe = &pe;
      ctx.cfg = &ecfg;
      ctx.params = &lifted;
      ctx.wiring = &wiring;
      ctx.plan = &plan;
      ctx.model_kind = tcfg.model_kind;
      ctx.model_ratio = tcfg.model_ratio;
      ctx.spec_a = tcfg.data_a;
      ctx.spec_b = tcfg.data_b;
      ctx.mae = has_mae ? &mae : nullptr;
      ctx.drop_counts = &drops;

      FourViewEmbeddings views = four_view_forward(tape, ctx, tcfg.mode, rng_aug);
      MultiViewLoss loss = multi_view_loss(tape, views, tcfg.temperature, tcfg.mode);
      const double value = tape.val(loss.total).scalar();
      check(std::isfinite(value), "train: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", batch " +
                                      std::to_string(b));
      tape.backward(loss.total);
      std::vector<Matrix> grads;
      grads.reserve(params.count());
      for (int i = 0; i < params.count(); ++i)
        grads.push_back(tape.grad(lifted.at(params.name(i))));
      adam_step(params, grads, adam);

      loss_sum += value;
      g12 += loss.g12;
      g34 += loss.g34;
      g13 += loss.g13;
      g24 += loss.g24;
    }

    const double nb = static_cast<double>(chunks.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / nb;
    rec.g12 = g12 / nb;
    rec.g34 = g34 / nb;
    rec.g13 = g13 / nb;
    rec.g24 = g24 / nb;
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    out.records.push_back(rec);
    metrics << rec.epoch << ',' << fmt17(rec.mean_loss) << ',' << fmt17(rec.g12)
            << ',' << fmt17(rec.g34) << ',' << fmt17(rec.g13) << ','
            << fmt17(rec.g24) << ',' << rec.wall_ms << '\n';
    metrics.flush();
    plan_log << epoch << ',' << count_zeros(plan.weight_masks) << ','
             << drops.layers << ',' << drops.heads << '\n';
    plan_log.flush();

    if (epoch % tcfg.checkpoint_every == 0 || epoch == tcfg.epochs)
      out.checkpoints.emplace_back(epoch, save(epoch, /*with_adam=*/true));
  }

  check(static_cast<bool>(metrics), "train: metric log write failed");
  check(static_cast<bool>(plan_log), "train: plan log write failed");
  out.final_checkpoint = out.checkpoints.back().second;
  out.params = params;
  return out;
}

}  // namespace grapple
