#include "grapple/contrastive.hpp"

#include "grapple/error.hpp"

namespace grapple {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::dual: return "dual";
    case TrainMode::data_only: return "data-only";
    case TrainMode::model_only: return "model-only";
    case TrainMode::pairwise_all: return "pairwise-all";
  }
  fail("unreachable TrainMode");
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "dual") return TrainMode::dual;
  if (name == "data-only") return TrainMode::data_only;
  if (name == "model-only") return TrainMode::model_only;
  if (name == "pairwise-all") return TrainMode::pairwise_all;
  fail("unknown train mode '" + name + "'");
}

Var nt_xent_group(Tape& tape, Var za, Var zb, double temperature) {
  const int n = tape.val(za).rows;
  const int d = tape.val(za).cols;
  check(tape.val(zb).rows == n && tape.val(zb).cols == d,
        "nt_xent_group: view shapes differ");
  check(n >= 2, "nt_xent_group: need at least 2 graphs for negatives");
  check(temperature > 0.0, "nt_xent_group: temperature must be positive");

  // Row-normalize both views; a zero-norm row surfaces as a division error.
  Var ones_d = tape.constant(Matrix::ones(1, d));
  Var na = tape.div(za, tape.matmul(tape.l2norm_rows(za), ones_d));
  Var nb = tape.div(zb, tape.matmul(tape.l2norm_rows(zb), ones_d));

  // Scaled cosine similarities and their exponentials.
  Var scores = tape.scale(tape.matmul(na, tape.transpose(nb)), 1.0 / temperature);
  Var escore = tape.exp_elem(scores);

  Matrix eye = Matrix::zeros(n, n);
  Matrix offdiag = Matrix::ones(n, n);
  for (int i = 0; i < n; ++i) {
    eye.at(i, i) = 1.0;
    offdiag.at(i, i) = 0.0;
  }
  Var diag = tape.sum_rows(tape.mul(scores, tape.constant(eye)));  // n x 1
  Var masked = tape.mul(escore, tape.constant(offdiag));
  Var den_ab = tape.sum_rows(masked);                   // negatives for a->b
  Var den_ba = tape.sum_rows(tape.transpose(masked));   // negatives for b->a
  Var loss_ab = tape.mean_all(tape.sub(tape.log_elem(den_ab), diag));
  Var loss_ba = tape.mean_all(tape.sub(tape.log_elem(den_ba), diag));
  return tape.scale(tape.add(loss_ab, loss_ba), 0.5);
}

double nt_xent_group_value(const Matrix& za, const Matrix& zb, double temperature) {
  Tape tape;
  return tape.val(nt_xent_group(tape, tape.constant(za), tape.constant(zb),
                                temperature))
      .scalar();
}

DataView apply_data_view(Tape& tape, const GraphBatch& batch, const Matrix& pe,
                         const DataAugSpec& spec, const LiftedParams& params,
                         const MaeLiteModel* mae, RngStream& rng) {
  spec.validate();
  check(pe.rows == batch.total_nodes, "apply_data_view: pe rows != batch nodes");
  DataView view;
  switch (spec.kind) {
    case DataAugKind::identity:
      view.features = tape.constant(batch.node_features);
      view.pe = tape.constant(pe);
      return view;
    case DataAugKind::pe_mask:
      view.features = tape.constant(batch.node_features);
      view.pe = tape.constant(mask_pe_channels(pe, spec.ratio, rng));
      return view;
    case DataAugKind::selective_node_mask: {
      SelectiveMaskResult r = selective_node_mask(
          tape, batch, tape.constant(batch.node_features), pe,
          params.at("scorer.w"), params.at("scorer.b"), spec.ratio,
          spec.gumbel_temperature, rng);
      view.features = r.features;
      view.pe = tape.constant(r.pe);
      view.keep_mask = r.keep_mask;
      return view;
    }
    case DataAugKind::generative:
      check(mae != nullptr, "apply_data_view: generative augmentation needs a "
                            "pretrained reconstruction model");
      view.features = tape.constant(generative_augment(batch, *mae, spec.ratio, rng));
      view.pe = tape.constant(pe);
      return view;
    case DataAugKind::feature_mask_baseline:
      view.features =
          tape.constant(feature_mask_baseline(batch.node_features, spec.ratio, rng));
      view.pe = tape.constant(pe);
      return view;
  }
  fail("unreachable DataAugKind");
}

namespace {

// Fresh structural bits for one pass of the perturbed branch; weight masks
// and noise deltas stay as the per-epoch plan built them.
PerturbationPlan bits_for_pass(const ForwardContext& ctx, RngStream& rng) {
  PerturbationPlan bits = *ctx.plan;
  if (ctx.model_kind == ModelAugKind::layer_drop) {
    bits.layer_keep_bits = sample_layer_bits(ctx.cfg->num_layers, ctx.model_ratio, rng);
    bits.identity = false;
    if (ctx.drop_counts)
      for (int b : bits.layer_keep_bits) ctx.drop_counts->layers += b == 0;
  } else if (ctx.model_kind == ModelAugKind::head_drop) {
    bits.head_keep_bits =
        sample_head_bits(ctx.cfg->num_layers, ctx.cfg->num_heads, ctx.model_ratio, rng);
    bits.identity = false;
    if (ctx.drop_counts)
      for (double b : bits.head_keep_bits.a) ctx.drop_counts->heads += b == 0.0;
  }
  return bits;
}

Var encode_and_project(Tape& tape, const ForwardContext& ctx, const DataView& view,
                       const LiftedParams& weights, const PerturbationPlan& plan) {
  EncodeResult r = encode_batch(tape, *ctx.batch, view.features, view.pe, *ctx.cfg,
                                weights, *ctx.wiring, plan);
  return project_head(tape, r.graph_reps, *ctx.params);
}

}  // namespace

FourViewEmbeddings four_view_forward(Tape& tape, const ForwardContext& ctx,
                                     TrainMode mode, RngStream& rng) {
  check(ctx.batch && ctx.pe && ctx.cfg && ctx.params && ctx.wiring && ctx.plan,
        "four_view_forward: incomplete context");
  const bool need_b = mode != TrainMode::model_only;
  const bool need_hat = mode != TrainMode::data_only;

  DataView va = apply_data_view(tape, *ctx.batch, *ctx.pe, ctx.spec_a, *ctx.params,
                                ctx.mae, rng);
  DataView vb;
  if (need_b)
    vb = apply_data_view(tape, *ctx.batch, *ctx.pe, ctx.spec_b, *ctx.params,
                         ctx.mae, rng);

  const PerturbationPlan no_plan;
  LiftedParams hat_weights;
  if (need_hat) hat_weights = apply_plan_weights(tape, *ctx.params, *ctx.plan);

  FourViewEmbeddings z;
  z.z1 = encode_and_project(tape, ctx, va, *ctx.params, no_plan);
  if (need_hat)
    z.z2 = encode_and_project(tape, ctx, va, hat_weights, bits_for_pass(ctx, rng));
  if (need_b)
    z.z3 = encode_and_project(tape, ctx, vb, *ctx.params, no_plan);
  if (need_b && need_hat)
    z.z4 = encode_and_project(tape, ctx, vb, hat_weights, bits_for_pass(ctx, rng));
  return z;
}

MultiViewLoss multi_view_loss(Tape& tape, const FourViewEmbeddings& views,
                              double temperature, TrainMode mode) {
  MultiViewLoss out;
  auto group = [&](Var a, Var b) {
    check(a.valid() && b.valid(), "multi_view_loss: mode needs a view that was not computed");
    return nt_xent_group(tape, a, b, temperature);
  };
  switch (mode) {
    case TrainMode::dual: {
      Var g12 = group(views.z1, views.z2);
      Var g34 = group(views.z3, views.z4);
      Var g13 = group(views.z1, views.z3);
      Var g24 = group(views.z2, views.z4);
      out.total = tape.add(tape.add(g12, g34), tape.add(g13, g24));
      out.g12 = tape.val(g12).scalar();
      out.g34 = tape.val(g34).scalar();
      out.g13 = tape.val(g13).scalar();
      out.g24 = tape.val(g24).scalar();
      return out;
    }
    case TrainMode::data_only: {
      Var g13 = group(views.z1, views.z3);
      out.total = g13;
      out.g13 = tape.val(g13).scalar();
      return out;
    }
    case TrainMode::model_only: {
      Var g12 = group(views.z1, views.z2);
      out.total = g12;
      out.g12 = tape.val(g12).scalar();
      return out;
    }
    case TrainMode::pairwise_all: {
      Var g12 = group(views.z1, views.z2);
      Var g13 = group(views.z1, views.z3);
      Var g14 = group(views.z1, views.z4);
      Var g23 = group(views.z2, views.z3);
      Var g24 = group(views.z2, views.z4);
      Var g34 = group(views.z3, views.z4);
      out.total = tape.add(tape.add(tape.add(g12, g13), tape.add(g14, g23)),
                           tape.add(g24, g34));
      out.g12 = tape.val(g12).scalar();
      out.g34 = tape.val(g34).scalar();
      out.g13 = tape.val(g13).scalar();
      out.g24 = tape.val(g24).scalar();
      return out;
    }
  }
  fail("unreachable TrainMode");
}

}  // namespace grapple
