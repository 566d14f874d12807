#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "grapple/augment.hpp"
#include "grapple/checkpoint.hpp"
#include "grapple/encoder.hpp"
#include "grapple/error.hpp"
#include "grapple/graph.hpp"
#include "grapple/mae.hpp"
#include "grapple/matrix.hpp"
#include "grapple/perturb.hpp"
#include "grapple/rng.hpp"
#include "grapple/tu_io.hpp"

using namespace grapple;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& und,
                 const Matrix& features, int label = 0) {
  Graph g;
  g.num_nodes = n;
  for (auto [u, v] : und) {
    g.edges.emplace_back(u, v);
    g.edges.emplace_back(v, u);
  }
  g.node_features = features;
  g.label = label;
  return g;
}

// 4-node path and a 3-node triangle with hand-picked feature values in the
// first column (the scorer weight below reads only that column).
GraphBatch two_graph_batch() {
  Matrix f1(4, 2);
  f1.at(0, 0) = 0.4; f1.at(1, 0) = 0.3; f1.at(2, 0) = 0.2; f1.at(3, 0) = 0.1;
  for (int i = 0; i < 4; ++i) f1.at(i, 1) = 1.0;
  Matrix f2(3, 2);
  f2.at(0, 0) = -1.0; f2.at(1, 0) = 2.0; f2.at(2, 0) = 0.5;
  for (int i = 0; i < 3; ++i) f2.at(i, 1) = 1.0;
  Graph a = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, f1, 0);
  Graph b = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, f2, 1);
  return batch_graphs({a, b});
}

Dataset tiny_feature_dataset() {
  Dataset ds;
  ds.name = "tiny";
  ds.num_classes = 2;
  ds.feature_dim = 3;
  RngStream rng(41, 3);
  for (int i = 0; i < 8; ++i) {
    const int n = 4 + (i % 3);
    Matrix f(n, 3);
    for (double& v : f.a) v = rng.normal();
    std::vector<std::pair<int, int>> und;
    for (int u = 0; u + 1 < n; ++u) und.emplace_back(u, u + 1);
    Graph g = make_graph(n, und, f, i % 2);
    g.graph_id = i;
    ds.graphs.push_back(g);
  }
  return ds;
}

}  // namespace

TEST_CASE("augmentation spec validation") {
  DataAugSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.ratio = -0.1;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.ratio = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.ratio = 1.0;
  spec.kind = DataAugKind::pe_mask;
  CHECK_NOTHROW(spec.validate());
  spec.kind = DataAugKind::selective_node_mask;
  CHECK_THROWS_AS(spec.validate(), Error);  // selective needs ratio < 1
  spec.ratio = 0.2;
  spec.gumbel_temperature = 0.0;
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("data augmentation kind names round-trip") {
  for (DataAugKind k : {DataAugKind::identity, DataAugKind::pe_mask,
                        DataAugKind::selective_node_mask, DataAugKind::generative,
                        DataAugKind::feature_mask_baseline}) {
    CHECK(data_aug_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(data_aug_kind_from_string("nonsense"), Error);
}

TEST_CASE("keep-bit sampling hits the exact endpoints") {
  RngStream rng(1, 2);
  const std::vector<int> all = sample_keep_bits(50, 0.0, rng);
  CHECK(std::count(all.begin(), all.end(), 1) == 50);
  const std::vector<int> none = sample_keep_bits(50, 1.0, rng);
  CHECK(std::count(none.begin(), none.end(), 0) == 50);
  CHECK_THROWS_AS(sample_keep_bits(5, 1.2, rng), Error);
}

TEST_CASE("PE channel masking zeroes exactly the dropped channels") {
  RngStream rng(7, 13);
  Matrix pe(6, 8);
  RngStream fill(9, 1);
  for (double& v : pe.a) v = fill.normal();

  std::vector<int> bits;
  const Matrix masked = mask_pe_channels(pe, 0.5, rng, &bits);
  REQUIRE(static_cast<int>(bits.size()) == pe.cols);
  for (int j = 0; j < pe.cols; ++j) {
    for (int i = 0; i < pe.rows; ++i) {
      if (bits[j] == 1) {
        CHECK(masked.at(i, j) == pe.at(i, j));  // untouched entries bitwise
      } else {
        CHECK(masked.at(i, j) == 0.0);
      }
    }
  }

  // Replaying the stream reproduces the draw bit for bit.
  RngStream replay(7, 13);
  std::vector<int> bits2;
  const Matrix masked2 = mask_pe_channels(pe, 0.5, replay, &bits2);
  CHECK(bits2 == bits);
  CHECK(max_abs_diff(masked2, masked) == 0.0);
}

TEST_CASE("baseline feature masking behaves like PE masking on columns") {
  RngStream rng(3, 13);
  Matrix f(5, 6);
  RngStream fill(4, 1);
  for (double& v : f.a) v = fill.normal();
  std::vector<int> bits;
  const Matrix masked = feature_mask_baseline(f, 0.4, rng, &bits);
  REQUIRE(static_cast<int>(bits.size()) == f.cols);
  for (int j = 0; j < f.cols; ++j)
    for (int i = 0; i < f.rows; ++i)
      CHECK(masked.at(i, j) == (bits[j] ? f.at(i, j) : 0.0));
}

TEST_CASE("hard node selection masks the lowest-weight nodes per graph") {
  const GraphBatch batch = two_graph_batch();

  SUBCASE("documented example: p=0.25 over four nodes masks the smallest") {
    std::vector<double> w = {0.4, 0.3, 0.2, 0.1, /*graph 2*/ 0.3, 0.3, 0.4};
    const std::vector<int> keep = select_keep_mask(w, batch, 0.25);
    CHECK(keep == std::vector<int>{1, 1, 1, 0, /*graph 2*/ 0, 1, 1});
  }
  SUBCASE("p = 0 keeps everything") {
    std::vector<double> w = {0.4, 0.3, 0.2, 0.1, 0.3, 0.3, 0.4};
    const std::vector<int> keep = select_keep_mask(w, batch, 0.0);
    CHECK(keep == std::vector<int>(7, 1));
  }
  SUBCASE("ties mask the lower node index") {
    std::vector<double> w = {0.25, 0.25, 0.25, 0.25, /*graph 2*/ 0.5, 0.2, 0.2};
    const std::vector<int> keep = select_keep_mask(w, batch, 0.25);
    CHECK(keep == std::vector<int>{0, 1, 1, 1, /*graph 2*/ 1, 0, 1});
  }
  SUBCASE("a rate that would mask the whole graph keeps the top node") {
    std::vector<double> w = {0.1, 0.4, 0.3, 0.2, /*graph 2*/ 0.2, 0.7, 0.1};
    const std::vector<int> keep = select_keep_mask(w, batch, 0.9);
    CHECK(keep == std::vector<int>{0, 1, 0, 0, /*graph 2*/ 0, 1, 0});
  }
  SUBCASE("preconditions") {
    std::vector<double> w(7, 0.5);
    CHECK_THROWS_AS(select_keep_mask(w, batch, 1.0), Error);
    std::vector<double> short_w(6, 0.5);
    CHECK_THROWS_AS(select_keep_mask(short_w, batch, 0.2), Error);
  }
}

TEST_CASE("selective node masking matches the manual factor computation") {
  const GraphBatch batch = two_graph_batch();
  Matrix pe(batch.total_nodes, 3);
  RngStream fill(11, 1);
  for (double& v : pe.a) v = fill.normal();

  Tape tape;
  Var features = tape.constant(batch.node_features);
  Matrix w0(2, 1);
  w0.at(0, 0) = 1.0;  // score = first feature column
  Var w = tape.leaf(w0, true);
  Var b = tape.leaf(Matrix::zeros(1, 1), true);
  const Matrix zero_noise = Matrix::zeros(batch.total_nodes, 1);
  const double p = 0.25;
  SelectiveMaskResult res = selective_node_mask_with_noise(
      tape, batch, features, pe, w, b, p, 1.0, zero_noise);

  // Manual soft weights: per-graph softmax of the first feature column.
  const Matrix& soft = tape.val(res.soft_weights);
  for (int g = 0; g < batch.num_graphs; ++g) {
    double den = 0.0, mx = -1e300;
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i)
      mx = std::max(mx, batch.node_features.at(i, 0));
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i)
      den += std::exp(batch.node_features.at(i, 0) - mx);
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i) {
      const double want = std::exp(batch.node_features.at(i, 0) - mx) / den;
      CHECK(soft.at(i, 0) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  // The hard mask must agree with the standalone rule on the soft weights.
  std::vector<double> wts(soft.a.begin(), soft.a.end());
  CHECK(res.keep_mask == select_keep_mask(wts, batch, p));

  // Kept rows scale by n_g * S_i / sum_kept S; masked rows are exact zeros;
  // PE rows of masked nodes are zeroed, kept PE rows are bitwise untouched.
  const Matrix& out = tape.val(res.features);
  for (int g = 0; g < batch.num_graphs; ++g) {
    double kept_sum = 0.0;
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i)
      if (res.keep_mask[i]) kept_sum += soft.at(i, 0);
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i) {
      if (!res.keep_mask[i]) {
        for (int j = 0; j < out.cols; ++j) CHECK(out.at(i, j) == 0.0);
        for (int j = 0; j < pe.cols; ++j) CHECK(res.pe.at(i, j) == 0.0);
        continue;
      }
      const double factor =
          batch.graph_sizes[g] * soft.at(i, 0) / kept_sum;
      for (int j = 0; j < out.cols; ++j) {
        CHECK(out.at(i, j) ==
              doctest::Approx(batch.node_features.at(i, j) * factor)
                  .epsilon(1e-12));
      }
      for (int j = 0; j < pe.cols; ++j) CHECK(res.pe.at(i, j) == pe.at(i, j));
    }
  }

  // Gradient reaches the scorer through the soft weights of kept rows.
  Var loss = tape.mean_all(res.features);
  tape.backward(loss);
  const Matrix gw = tape.grad(w);
  CHECK(gw.rows == 2);
  CHECK(std::fabs(gw.at(0, 0)) > 0.0);
}

TEST_CASE("selective masking at p = 0 with uniform scores is the identity") {
  const GraphBatch batch = two_graph_batch();
  Matrix pe(batch.total_nodes, 3);
  for (double& v : pe.a) v = 0.5;
  Tape tape;
  Var features = tape.constant(batch.node_features);
  Var w = tape.constant(Matrix::zeros(2, 1));  // uniform scores
  Var b = tape.constant(Matrix::zeros(1, 1));
  SelectiveMaskResult res = selective_node_mask_with_noise(
      tape, batch, features, pe, w, b, 0.0, 1.0,
      Matrix::zeros(batch.total_nodes, 1));
  // factor = n_g * (1/n_g) / 1 = 1 for every node.
  CHECK(max_abs_diff(tape.val(res.features), batch.node_features) <= 1e-15);
  CHECK(max_abs_diff(res.pe, pe) == 0.0);
  CHECK(std::count(res.keep_mask.begin(), res.keep_mask.end(), 1) ==
        batch.total_nodes);
}

TEST_CASE("stream-driven selective masking is deterministic") {
  const GraphBatch batch = two_graph_batch();
  Matrix pe = Matrix::ones(batch.total_nodes, 3);
  auto run = [&](RngStream rng) {
    Tape tape;
    Var features = tape.constant(batch.node_features);
    Var w = tape.constant(Matrix::ones(2, 1));
    Var b = tape.constant(Matrix::zeros(1, 1));
    SelectiveMaskResult res = selective_node_mask(tape, batch, features, pe, w,
                                                  b, 0.4, 1.0, rng);
    return std::make_pair(tape.val(res.features), res.keep_mask);
  };
  auto [f1, k1] = run(RngStream(21, 13));
  auto [f2, k2] = run(RngStream(21, 13));
  CHECK(k1 == k2);
  CHECK(max_abs_diff(f1, f2) == 0.0);
  // ceil(0.4 * 4) = 2 masked in the path, ceil(0.4 * 3) = 2 in the triangle.
  CHECK(std::count(k1.begin(), k1.begin() + 4, 0) == 2);
  CHECK(std::count(k1.begin() + 4, k1.end(), 0) == 2);
}

TEST_CASE("pruning pool covers encoder weights and nothing else") {
  EncoderConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.hidden_dim = 8;
  cfg.pe_dim = 4;
  cfg.input_dim = 3;
  ParamStore params;
  RngStream rng(5, 11);
  add_encoder_params(params, cfg, rng);
  add_projection_params(params, cfg, rng);
  add_scorer_params(params, cfg, rng);
  const std::vector<std::string> pool = perturbation_pool(params);
  CHECK(!pool.empty());
  for (const std::string& name : pool) {
    CHECK(name.rfind("enc.", 0) == 0);
    CHECK(name.find(".ln") == std::string::npos);
  }
  const auto in_pool = [&](const std::string& n) {
    return std::find(pool.begin(), pool.end(), n) != pool.end();
  };
  CHECK(in_pool("enc.input.w"));
  CHECK(in_pool("enc.l0.gin.w1"));
  CHECK(in_pool("enc.l1.attn.h1.wv"));
  CHECK(in_pool("enc.l1.ffn.w2"));
  CHECK(!in_pool("enc.l0.ln1.g"));
  CHECK(!in_pool("proj.w1"));
  CHECK(!in_pool("scorer.w"));
}

TEST_CASE("global magnitude pruning is exact") {
  ParamStore params;
  Matrix first(2, 2);
  first.at(0, 0) = 1.0; first.at(0, 1) = -2.0;
  first.at(1, 0) = 3.0; first.at(1, 1) = 0.5;
  Matrix second(1, 4);
  second.at(0, 0) = -0.5; second.at(0, 1) = 4.0;
  second.at(0, 2) = 5.0;  second.at(0, 3) = 6.0;
  params.add("w_first", first);
  params.add("w_second", second);
  const std::vector<std::string> pool = {"w_first", "w_second"};

  SUBCASE("count is ceil(p * pool size) with magnitude dominance") {
    const auto masks = build_weight_prune_mask(params, pool, 0.25);
    CHECK(count_zeros(masks) == 2);  // ceil(0.25 * 8)
    // The two smallest magnitudes are the two 0.5 entries.
    CHECK(masks.at("w_first").at(1, 1) == 0.0);
    CHECK(masks.at("w_second").at(0, 0) == 0.0);
    double max_zeroed = 0.0, min_kept = 1e300;
    for (const auto& [name, mask] : masks) {
      const Matrix& v = params.at(name);
      for (int i = 0; i < mask.size(); ++i) {
        if (mask.a[i] == 0.0) max_zeroed = std::max(max_zeroed, std::fabs(v.a[i]));
        else min_kept = std::min(min_kept, std::fabs(v.a[i]));
      }
    }
    CHECK(max_zeroed <= min_kept);
  }
  SUBCASE("magnitude ties break toward the earlier pool position") {
    const auto masks = build_weight_prune_mask(params, pool, 0.125);  // 1 zero
    CHECK(count_zeros(masks) == 1);
    CHECK(masks.at("w_first").at(1, 1) == 0.0);   // flat 3, |.| = 0.5
    CHECK(masks.at("w_second").at(0, 0) == 1.0);  // flat 4, |.| = 0.5
  }
  SUBCASE("p = 0 zeroes nothing") {
    const auto masks = build_weight_prune_mask(params, pool, 0.0);
    CHECK(count_zeros(masks) == 0);
  }
}

TEST_CASE("structural bit sampling endpoints and shapes") {
  RngStream rng(9, 14);
  CHECK(sample_layer_bits(3, 0.0, rng) == std::vector<int>{1, 1, 1});
  CHECK(sample_layer_bits(3, 1.0, rng) == std::vector<int>{0, 0, 0});
  const Matrix heads = sample_head_bits(2, 4, 0.0, rng);
  CHECK(heads.rows == 2);
  CHECK(heads.cols == 4);
  for (double v : heads.a) CHECK(v == 1.0);
  const Matrix none = sample_head_bits(2, 4, 1.0, rng);
  for (double v : none.a) CHECK(v == 0.0);

  RngStream a(17, 14), b(17, 14);
  CHECK(sample_layer_bits(8, 0.5, a) == sample_layer_bits(8, 0.5, b));
  CHECK(max_abs_diff(sample_head_bits(3, 4, 0.5, a),
                     sample_head_bits(3, 4, 0.5, b)) == 0.0);
}

TEST_CASE("gaussian weight noise scales with the grid spread") {
  ParamStore params;
  Matrix constant_grid = Matrix(2, 3, 0.7);  // zero spread
  Matrix spread_grid(2, 3);
  RngStream fill(6, 1);
  for (double& v : spread_grid.a) v = fill.normal();
  params.add("flat", constant_grid);
  params.add("spread", spread_grid);
  RngStream rng(8, 14);
  const auto deltas =
      gaussian_noise_deltas(params, {"flat", "spread"}, 0.1, rng);
  REQUIRE(deltas.count("flat") == 1);
  REQUIRE(deltas.count("spread") == 1);
  CHECK(max_abs_diff(deltas.at("flat"), Matrix::zeros(2, 3)) == 0.0);
  double largest = 0.0;
  for (double v : deltas.at("spread").a) largest = std::max(largest, std::fabs(v));
  CHECK(largest > 0.0);

  RngStream replay(8, 14);
  const auto again =
      gaussian_noise_deltas(params, {"flat", "spread"}, 0.1, replay);
  CHECK(max_abs_diff(again.at("spread"), deltas.at("spread")) == 0.0);
}

TEST_CASE("MAE model construction and node subset sampling") {
  RngStream rng(12, 15);
  MaeLiteModel model = make_mae_model(3, 8, rng);
  CHECK(model.feature_dim == 3);
  CHECK(model.hidden_dim == 8);
  CHECK(model.params.has("mae.enc.w"));
  CHECK(model.params.has("mae.dec.w"));
  CHECK(model.params.has("mae.mask"));
  CHECK(model.params.has("mae.remask"));
  CHECK(model.params.at("mae.enc.w").rows == 3);
  CHECK(model.params.at("mae.enc.w").cols == 8);
  CHECK(model.params.at("mae.dec.w").rows == 8);
  CHECK(model.params.at("mae.dec.w").cols == 3);

  const GraphBatch batch = two_graph_batch();
  RngStream draw(13, 15);
  const std::vector<int> rows = sample_node_subset(batch, 0.5, draw);
  CHECK(std::is_sorted(rows.begin(), rows.end()));
  CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
  int in_first = 0, in_second = 0;
  for (int r : rows) {
    REQUIRE(r >= 0);
    REQUIRE(r < batch.total_nodes);
    (r < 4 ? in_first : in_second)++;
  }
  CHECK(in_first == 2);   // ceil(0.5 * 4)
  CHECK(in_second == 2);  // ceil(0.5 * 3)

  RngStream none(13, 15);
  CHECK(sample_node_subset(batch, 0.0, none).empty());
}

TEST_CASE("generative augmentation at rate zero is the bitwise identity") {
  const GraphBatch batch = two_graph_batch();
  RngStream rng(14, 15);
  MaeLiteModel model = make_mae_model(2, 6, rng);
  RngStream draw(15, 15);
  std::vector<int> replaced;
  const Matrix out = generative_augment(batch, model, 0.0, draw, &replaced);
  CHECK(replaced.empty());
  CHECK(max_abs_diff(out, batch.node_features) == 0.0);
}

TEST_CASE("generative augmentation rewrites exactly the chosen rows") {
  const GraphBatch batch = two_graph_batch();
  RngStream rng(16, 15);
  MaeLiteModel model = make_mae_model(2, 6, rng);
  const std::vector<int> rows = {1, 4};
  const Matrix out = generative_augment_rows(batch, model, rows);
  const Matrix recon = mae_reconstruct(model, batch, rows);
  for (int i = 0; i < batch.total_nodes; ++i) {
    const bool chosen = std::find(rows.begin(), rows.end(), i) != rows.end();
    for (int j = 0; j < out.cols; ++j) {
      if (chosen) {
        CHECK(out.at(i, j) == recon.at(i, j));
      } else {
        CHECK(out.at(i, j) == batch.node_features.at(i, j));
      }
    }
  }
}

TEST_CASE("MAE pretraining reduces the reconstruction loss") {
  const Dataset ds = tiny_feature_dataset();
  RngStream rng(17, 15);
  MaeLiteModel model = make_mae_model(ds.feature_dim, 8, rng);
  RngStream train(18, 15);
  const MaePretrainStats stats = pretrain_mae(model, ds, 0.3, 12, 4, 1e-2, train);
  CHECK(stats.epochs == 12);
  CHECK(stats.last_epoch_loss < stats.first_epoch_loss);
}

TEST_CASE("MAE pretraining with zero epochs is a bitwise no-op") {
  const Dataset ds = tiny_feature_dataset();
  RngStream rng(19, 15);
  MaeLiteModel model = make_mae_model(ds.feature_dim, 8, rng);
  std::vector<Matrix> before;
  for (int i = 0; i < model.params.count(); ++i) before.push_back(model.params.at(i));
  RngStream train(20, 15);
  const MaePretrainStats stats = pretrain_mae(model, ds, 0.3, 0, 4, 1e-2, train);
  CHECK(stats.epochs == 0);
  for (int i = 0; i < model.params.count(); ++i)
    CHECK(max_abs_diff(model.params.at(i), before[static_cast<size_t>(i)]) == 0.0);
}

TEST_CASE("MAE checkpoint round-trip is bitwise") {
  RngStream rng(22, 15);
  MaeLiteModel model = make_mae_model(5, 7, rng);
  const Checkpoint ckpt = mae_to_checkpoint(model);
  const std::string path = "mae_roundtrip_test.ckpt";
  save_checkpoint(path, ckpt);
  const Checkpoint loaded = load_checkpoint(path);
  const MaeLiteModel back = mae_from_checkpoint(loaded);
  std::remove(path.c_str());
  CHECK(back.feature_dim == model.feature_dim);
  CHECK(back.hidden_dim == model.hidden_dim);
  REQUIRE(back.params.count() == model.params.count());
  for (int i = 0; i < model.params.count(); ++i) {
    CHECK(back.params.name(i) == model.params.name(i));
    CHECK(max_abs_diff(back.params.at(i), model.params.at(i)) == 0.0);
  }
}
