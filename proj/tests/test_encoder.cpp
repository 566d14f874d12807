#include <string>
#include <vector>

#include "doctest.h"
#include "grapple/encoder.hpp"
#include "grapple/error.hpp"
#include "grapple/graph.hpp"
#include "grapple/params.hpp"
#include "grapple/perturb.hpp"
#include "grapple/rng.hpp"
#include "grapple/rwse.hpp"
#include "grapple/synthetic.hpp"
#include "grapple/tape.hpp"

using namespace grapple;

namespace {

struct Fixture {
  EncoderConfig cfg;
  std::vector<Graph> graphs;
  GraphBatch batch;
  Matrix pe;
  ParamStore params;
  BatchWiring wiring;

  explicit Fixture(int layers = 1, int heads = 2, int hidden = 16,
                   int num_graphs = 3, uint64_t seed = 5) {
    cfg.num_layers = layers;
    cfg.num_heads = heads;
    cfg.hidden_dim = hidden;
    cfg.pe_dim = 4;
    graphs = generate_synthetic_dataset(num_graphs, SyntheticSpec{}, seed);
    batch = batch_graphs(graphs);
    cfg.input_dim = batch.node_features.cols;
    pe = compute_rwse_batch(batch, cfg.pe_dim);
    RngStream rng(seed, 11);
    add_encoder_params(params, cfg, rng);
    add_projection_params(params, cfg, rng);
    add_scorer_params(params, cfg, rng);
    wiring = build_wiring(batch);
  }

  Matrix encode(const PerturbationPlan& plan) const {
    Tape tape;
    const LiftedParams lifted = lift_params(tape, params, false);
    const LiftedParams view = apply_plan_weights(tape, lifted, plan);
    const EncodeResult r =
        encode_batch(tape, batch, tape.constant(batch.node_features),
                     tape.constant(pe), cfg, view, wiring, plan);
    return tape.val(r.graph_reps);
  }
};

}  // namespace

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  cfg.input_dim = 3;
  CHECK_NOTHROW(cfg.validate());
  cfg.num_layers = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.num_layers = 2;
  cfg.hidden_dim = 30;  // not divisible by 4 heads
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.hidden_dim = 64;
  cfg.input_dim = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("parameter store layout is deterministic and complete") {
  Fixture f(2, 2, 16);
  ParamStore again;
  RngStream rng(5, 11);
  add_encoder_params(again, f.cfg, rng);
  add_projection_params(again, f.cfg, rng);
  add_scorer_params(again, f.cfg, rng);
  REQUIRE(again.count() == f.params.count());
  for (int i = 0; i < again.count(); ++i) {
    CHECK(again.name(i) == f.params.name(i));
    CHECK(max_abs_diff(again.at(i), f.params.at(i)) == 0.0);
  }
  CHECK(f.params.has("enc.input.w"));
  CHECK(f.params.has("enc.l0.attn.h0.wq"));
  CHECK(f.params.has("enc.l1.ffn.w2"));
  CHECK(f.params.has("proj.w1"));
  CHECK(f.params.has("scorer.w"));
  CHECK(f.params.at("enc.input.w").rows == f.cfg.input_dim + f.cfg.pe_dim);
  CHECK(f.params.at("enc.input.w").cols == f.cfg.hidden_dim);
}

TEST_CASE("batched encoding is independent per graph") {
  Fixture f(1, 2, 16, 4, 9);
  const Matrix together = f.encode(PerturbationPlan{});

  for (size_t i = 0; i < f.graphs.size(); ++i) {
    // A batch is only legal with >= 1 graphs; encode the graph alone.
    const GraphBatch single = batch_graphs({f.graphs[i]});
    const BatchWiring wiring = build_wiring(single);
    const Matrix pe = compute_rwse_batch(single, f.cfg.pe_dim);
    Tape tape;
    const LiftedParams lifted = lift_params(tape, f.params, false);
    const EncodeResult r =
        encode_batch(tape, single, tape.constant(single.node_features),
                     tape.constant(pe), f.cfg, lifted, wiring, PerturbationPlan{});
    const Matrix alone = tape.val(r.graph_reps);
    for (int c = 0; c < together.cols; ++c) {
      CHECK(alone.at(0, c) ==
            doctest::Approx(together.at(static_cast<int>(i), c)).epsilon(1e-10));
    }
  }
}

TEST_CASE("dropped layer equals the ReLU identity exactly") {
  Fixture f(1, 2, 16);
  PerturbationPlan drop;
  drop.identity = false;
  drop.layer_keep_bits = {0};
  const Matrix dropped = f.encode(drop);

  // Manual path: input projection, ReLU, mean pool — no layer body at all.
  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);
  Var x = tape.concat_cols(tape.constant(f.batch.node_features),
                           tape.constant(f.pe));
  Var h = tape.matmul(x, lifted.at("enc.input.w"));
  Var out = tape.matmul(tape.constant(f.wiring.pool), tape.relu(h));
  CHECK(max_abs_diff(dropped, tape.val(out)) == 0.0);
}

TEST_CASE("dropped head equals zeroing that head's value projection exactly") {
  Fixture f(1, 2, 16);
  PerturbationPlan drop;
  drop.identity = false;
  drop.head_keep_bits = Matrix::ones(1, 2);
  drop.head_keep_bits.at(0, 1) = 0.0;
  const Matrix via_bit = f.encode(drop);

  // Zeroed-block construction: same forward with head 1's value projection
  // forced to zero, so its attention output is a zero block in the concat.
  Fixture zeroed = f;
  Matrix& wv = zeroed.params.at("enc.l0.attn.h1.wv");
  for (double& v : wv.a) v = 0.0;
  const Matrix via_zero_v = zeroed.encode(PerturbationPlan{});

  CHECK(max_abs_diff(via_bit, via_zero_v) == 0.0);
}

TEST_CASE("kept layer with all-zero weights reduces to ReLU of its input") {
  // With every weight grid zeroed (gains kept at 1) the layer body
  // contributes nothing, so out = ReLU(0 * f + H) = ReLU(H).
  Fixture f(1, 2, 16);
  for (const std::string& name : f.params.names()) {
    if (name.rfind("enc.l0.", 0) != 0) continue;
    if (name.find(".ln") != std::string::npos) continue;  // keep LN affine
    Matrix& grid = f.params.at(name);
    for (double& v : grid.a) v = 0.0;
  }
  const Matrix zero_weights = f.encode(PerturbationPlan{});

  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);
  Var x = tape.concat_cols(tape.constant(f.batch.node_features),
                           tape.constant(f.pe));
  Var h = tape.matmul(x, lifted.at("enc.input.w"));
  Var out = tape.matmul(tape.constant(f.wiring.pool), tape.relu(h));
  CHECK(max_abs_diff(zero_weights, tape.val(out)) == 0.0);
}

TEST_CASE("readout is the per-graph mean of node representations") {
  Fixture f(1, 2, 16, 3, 12);
  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);
  const EncodeResult r =
      encode_batch(tape, f.batch, tape.constant(f.batch.node_features),
                   tape.constant(f.pe), f.cfg, lifted, f.wiring,
                   PerturbationPlan{});
  const Matrix nodes = tape.val(r.node_reps);
  const Matrix pooled = tape.val(r.graph_reps);
  for (int g = 0; g < f.batch.num_graphs; ++g) {
    for (int c = 0; c < pooled.cols; ++c) {
      double mean = 0.0;
      for (int i = f.batch.graph_begin(g); i < f.batch.graph_end(g); ++i) {
        mean += nodes.at(i, c);
      }
      mean /= static_cast<double>(f.batch.graph_sizes[g]);
      CHECK(pooled.at(g, c) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("projection head transforms and keeps shape") {
  Fixture f;
  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);
  const EncodeResult r =
      encode_batch(tape, f.batch, tape.constant(f.batch.node_features),
                   tape.constant(f.pe), f.cfg, lifted, f.wiring,
                   PerturbationPlan{});
  Var z = project_head(tape, r.graph_reps, lifted);
  const Matrix zv = tape.val(z);
  CHECK(zv.rows == f.batch.num_graphs);
  CHECK(zv.cols == f.cfg.hidden_dim);
  CHECK(zv.all_finite());
  CHECK(max_abs_diff(zv, tape.val(r.graph_reps)) > 0.0);
}

TEST_CASE("apply_plan_weights masks multiply and deltas add") {
  Fixture f;
  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);

  PerturbationPlan plan;
  plan.identity = false;
  const std::string target = "enc.l0.gin.w1";
  Matrix mask = Matrix::ones(f.params.at(target).rows, f.params.at(target).cols);
  mask.at(0, 0) = 0.0;
  plan.weight_masks[target] = mask;
  const LiftedParams masked = apply_plan_weights(tape, lifted, plan);
  const Matrix got = tape.val(masked.at(target));
  CHECK(got.at(0, 0) == 0.0);
  CHECK(got.at(1, 1) == f.params.at(target).at(1, 1));

  PerturbationPlan noise;
  noise.identity = false;
  Matrix delta = Matrix::zeros(f.params.at(target).rows, f.params.at(target).cols);
  delta.at(2, 3) = 0.25;
  noise.noise_deltas[target] = delta;
  const LiftedParams shifted = apply_plan_weights(tape, lifted, noise);
  CHECK(tape.val(shifted.at(target)).at(2, 3) ==
        f.params.at(target).at(2, 3) + 0.25);

  PerturbationPlan bad;
  bad.identity = false;
  bad.weight_masks[target] = Matrix::ones(1, 1);
  CHECK_THROWS_AS(apply_plan_weights(tape, lifted, bad), Error);
}

TEST_CASE("layer norm normalizes rows to zero mean and unit variance") {
  Tape tape;
  RngStream rng(3, 77);
  Matrix x0(5, 8);
  for (double& v : x0.a) v = 2.0 + 3.0 * rng.normal();
  Var gain = tape.constant(Matrix::ones(1, 8));
  Var offset = tape.constant(Matrix::zeros(1, 8));
  const Matrix y = tape.val(layer_norm(tape, tape.constant(x0), gain, offset));
  for (int i = 0; i < y.rows; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < y.cols; ++j) mean += y.at(i, j);
    mean /= y.cols;
    for (int j = 0; j < y.cols; ++j) {
      var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
    }
    var /= y.cols;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // epsilon-regularized
  }
}

TEST_CASE("encode_batch validates feature and plan shapes") {
  Fixture f(2, 2, 16);
  Tape tape;
  const LiftedParams lifted = lift_params(tape, f.params, false);
  PerturbationPlan bad_bits;
  bad_bits.identity = false;
  bad_bits.layer_keep_bits = {1};  // config has 2 layers
  CHECK_THROWS_AS(
      encode_batch(tape, f.batch, tape.constant(f.batch.node_features),
                   tape.constant(f.pe), f.cfg, lifted, f.wiring, bad_bits),
      Error);

  Tape tape2;
  const LiftedParams lifted2 = lift_params(tape2, f.params, false);
  CHECK_THROWS_AS(
      encode_batch(tape2, f.batch,
                   tape2.constant(Matrix::ones(f.batch.total_nodes + 1,
                                               f.cfg.input_dim)),
                   tape2.constant(f.pe), f.cfg, lifted2, f.wiring,
                   PerturbationPlan{}),
      Error);
}
