#include "grapple/encoder.hpp"

#include <cmath>

#include "grapple/error.hpp"

namespace grapple {

namespace {
constexpr double kLayerNormEps = 1e-5;
constexpr double kMaskPenalty = -1e9;

std::string lkey(int l, const std::string& suffix) {
  return "enc.l" + std::to_string(l) + "." + suffix;
}
}  // namespace

void EncoderConfig::validate() const {
  check(num_layers >= 1 && num_layers <= 3,
        "encoder: num_layers " + std::to_string(num_layers) + " outside {1,2,3}");
  check(num_heads >= 1, "encoder: num_heads must be >= 1");
  check(hidden_dim >= 1, "encoder: hidden_dim must be >= 1");
  check(hidden_dim % num_heads == 0,
        "encoder: hidden_dim " + std::to_string(hidden_dim) +
            " not divisible by num_heads " + std::to_string(num_heads));
  check(pe_dim >= 1, "encoder: pe_dim must be >= 1");
  check(input_dim >= 1, "encoder: input_dim must be set from the dataset");
}

void add_encoder_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int d = cfg.hidden_dim;
  params.add("enc.input.w", init_weight(cfg.input_dim + cfg.pe_dim, d, rng));
  for (int l = 0; l < cfg.num_layers; ++l) {
    params.add(lkey(l, "ln1.g"), Matrix::ones(1, d));
    params.add(lkey(l, "ln1.b"), Matrix::zeros(1, d));
    params.add(lkey(l, "gin.w1"), init_weight(d, d, rng));
    params.add(lkey(l, "gin.w2"), init_weight(d, d, rng));
    params.add(lkey(l, "ln2.g"), Matrix::ones(1, d));
    params.add(lkey(l, "ln2.b"), Matrix::zeros(1, d));
    for (int h = 0; h < cfg.num_heads; ++h) {
      const std::string hk = "attn.h" + std::to_string(h) + ".";
      params.add(lkey(l, hk + "wq"), init_weight(d, cfg.head_dim(), rng));
      params.add(lkey(l, hk + "wk"), init_weight(d, cfg.head_dim(), rng));
      params.add(lkey(l, hk + "wv"), init_weight(d, cfg.head_dim(), rng));
    }
    params.add(lkey(l, "attn.wo"), init_weight(d, d, rng));
    params.add(lkey(l, "ln3.g"), Matrix::ones(1, d));
    params.add(lkey(l, "ln3.b"), Matrix::zeros(1, d));
    params.add(lkey(l, "ffn.w1"), init_weight(d, 2 * d, rng));
    params.add(lkey(l, "ffn.w2"), init_weight(2 * d, d, rng));
  }
}

void add_projection_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng) {
  const int d = cfg.hidden_dim;
  params.add("proj.w1", init_weight(d, d, rng));
  params.add("proj.b1", Matrix::zeros(1, d));
  params.add("proj.w2", init_weight(d, d, rng));
  params.add("proj.b2", Matrix::zeros(1, d));
}

void add_scorer_params(ParamStore& params, const EncoderConfig& cfg, RngStream& rng) {
  params.add("scorer.w", init_weight(cfg.input_dim, 1, rng));
  params.add("scorer.b", Matrix::zeros(1, 1));
}

Var LiftedParams::at(const std::string& name) const {
  auto it = vars.find(name);
  check(it != vars.end(), "LiftedParams: unknown parameter '" + name + "'");
  return it->second;
}

LiftedParams lift_params(Tape& tape, const ParamStore& params, bool requires_grad) {
  LiftedParams out;
  for (int i = 0; i < params.count(); ++i)
    out.vars[params.name(i)] = tape.leaf(params.at(i), requires_grad);
  return out;
}

LiftedParams apply_plan_weights(Tape& tape, const LiftedParams& base,
                                const PerturbationPlan& plan) {
  if (plan.identity) return base;
  LiftedParams out = base;
  for (const auto& [name, mask] : plan.weight_masks) {
    Var theta = base.at(name);
    check(tape.val(theta).same_shape(mask),
          "apply_plan_weights: mask shape mismatch for '" + name + "'");
    out.vars[name] = tape.mul(theta, tape.constant(mask));
  }
  for (const auto& [name, delta] : plan.noise_deltas) {
    Var theta = out.vars.at(name);
    check(tape.val(theta).same_shape(delta),
          "apply_plan_weights: noise shape mismatch for '" + name + "'");
    out.vars[name] = tape.add(theta, tape.constant(delta));
  }
  return out;
}

BatchWiring build_wiring(const GraphBatch& batch) {
  BatchWiring w;
  w.edge_src.reserve(batch.edges.size());
  w.edge_dst.reserve(batch.edges.size());
  for (auto [u, v] : batch.edges) {
    w.edge_src.push_back(u);
    w.edge_dst.push_back(v);
  }
  const int n = batch.total_nodes;
  w.attn_mask = Matrix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (batch.membership[i] != batch.membership[j]) w.attn_mask.at(i, j) = kMaskPenalty;
  w.pool = Matrix(batch.num_graphs, n);
  int offset = 0;
  for (int g = 0; g < batch.num_graphs; ++g) {
    for (int i = 0; i < batch.graph_sizes[g]; ++i)
      w.pool.at(g, offset + i) = 1.0 / batch.graph_sizes[g];
    offset += batch.graph_sizes[g];
  }
  return w;
}

Var layer_norm(Tape& tape, Var x, Var gain, Var offset) {
  const int n = tape.val(x).rows;
  const int d = tape.val(x).cols;
  Var ones_row = tape.constant(Matrix::ones(1, d));
  Var mu = tape.mean_rows(x);                       // n x 1
  Var centered = tape.sub(x, tape.matmul(mu, ones_row));
  Var var = tape.mean_rows(tape.mul(centered, centered));
  Var sd = tape.sqrt_elem(tape.add_scalar(var, kLayerNormEps));
  Var normed = tape.div(centered, tape.matmul(sd, ones_row));
  return tape.add(tape.mul(normed, tape.broadcast_row(gain, n)),
                  tape.broadcast_row(offset, n));
}

namespace {

// Local message passing: GIN-style sum aggregation (self + neighbors),
// then a two-grid MLP with ReLU between.
Var gin_delta(Tape& tape, Var g1, const BatchWiring& w, int l, const LiftedParams& p) {
  const int n = tape.val(g1).rows;
  Var agg = g1;
  if (!w.edge_src.empty()) {
    Var msgs = tape.gather_rows(g1, w.edge_src);
    agg = tape.add(g1, tape.scatter_add_rows(msgs, w.edge_dst, n));
  }
  Var hidden = tape.relu(tape.matmul(agg, p.at(lkey(l, "gin.w1"))));
  return tape.matmul(hidden, p.at(lkey(l, "gin.w2")));
}

// Global attention over each graph's nodes (mask keeps graphs separate).
// Scaled dot-product per head at width d/N_h; dropped heads contribute an
// exact zero block to the concatenation, mixed bias-free by W^O.
Var mha_delta(Tape& tape, Var g2, const BatchWiring& w, const EncoderConfig& cfg, int l,
              const LiftedParams& p, const PerturbationPlan& plan) {
  const int n = tape.val(g2).rows;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
  Var mask = tape.constant(w.attn_mask);
  Var heads;
  for (int h = 0; h < cfg.num_heads; ++h) {
    Var block;
    if (plan.head_bit(l, h) == 0) {
      block = tape.constant(Matrix::zeros(n, cfg.head_dim()));
    } else {
      const std::string hk = "attn.h" + std::to_string(h) + ".";
      Var q = tape.matmul(g2, p.at(lkey(l, hk + "wq")));
      Var k = tape.matmul(g2, p.at(lkey(l, hk + "wk")));
      Var v = tape.matmul(g2, p.at(lkey(l, hk + "wv")));
      Var scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_scale);
      Var probs = tape.softmax_rows(tape.add(scores, mask));
      block = tape.matmul(probs, v);
    }
    heads = h == 0 ? block : tape.concat_cols(heads, block);
  }
  return tape.matmul(heads, p.at(lkey(l, "attn.wo")));
}

Var ffn(Tape& tape, Var x, int l, const LiftedParams& p) {
  Var hidden = tape.relu(tape.matmul(x, p.at(lkey(l, "ffn.w1"))));
  return tape.matmul(hidden, p.at(lkey(l, "ffn.w2")));
}

}  // namespace

EncodeResult encode_batch(Tape& tape, const GraphBatch& batch, Var features, Var pe,
                          const EncoderConfig& cfg, const LiftedParams& p,
                          const BatchWiring& wiring, const PerturbationPlan& plan) {
  cfg.validate();
  check(tape.val(features).rows == batch.total_nodes,
        "encode_batch: feature rows != batch nodes");
  check(tape.val(features).cols == cfg.input_dim,
        "encode_batch: feature width " + std::to_string(tape.val(features).cols) +
            " != configured input_dim " + std::to_string(cfg.input_dim));
  check(tape.val(pe).rows == batch.total_nodes, "encode_batch: pe rows != batch nodes");
  check(tape.val(pe).cols == cfg.pe_dim, "encode_batch: pe width != configured pe_dim");
  if (!plan.layer_keep_bits.empty())
    check(static_cast<int>(plan.layer_keep_bits.size()) == cfg.num_layers,
          "encode_batch: plan layer bits sized for a different depth");
  if (!plan.head_keep_bits.empty())
    check(plan.head_keep_bits.rows == cfg.num_layers &&
              plan.head_keep_bits.cols == cfg.num_heads,
          "encode_batch: plan head bits sized for a different attention shape");

  Var h = tape.matmul(tape.concat_cols(features, pe), p.at("enc.input.w"));
  for (int l = 0; l < cfg.num_layers; ++l) {
    if (plan.layer_bit(l) == 0) {
      // Dropped layer: ReLU(0 * f(H) + H), computed without touching f.
      h = tape.relu(h);
      continue;
    }
    Var g1 = layer_norm(tape, h, p.at(lkey(l, "ln1.g")), p.at(lkey(l, "ln1.b")));
    Var local = gin_delta(tape, g1, wiring, l, p);
    Var g2 = layer_norm(tape, h, p.at(lkey(l, "ln2.g")), p.at(lkey(l, "ln2.b")));
    Var global = mha_delta(tape, g2, wiring, cfg, l, p, plan);
    Var mixed = tape.add(local, global);
    Var g3 = layer_norm(tape, tape.add(h, mixed), p.at(lkey(l, "ln3.g")),
                        p.at(lkey(l, "ln3.b")));
    Var f = tape.add(mixed, ffn(tape, g3, l, p));
    h = tape.relu(tape.add(f, h));
  }
  EncodeResult r;
  r.node_reps = h;
  r.graph_reps = tape.matmul(tape.constant(wiring.pool), h);
  return r;
}

Var project_head(Tape& tape, Var graph_reps, const LiftedParams& p) {
  const int n = tape.val(graph_reps).rows;
  Var hidden = tape.relu(tape.add(tape.matmul(graph_reps, p.at("proj.w1")),
                                  tape.broadcast_row(p.at("proj.b1"), n)));
  return tape.add(tape.matmul(hidden, p.at("proj.w2")),
                  tape.broadcast_row(p.at("proj.b2"), n));
}

}  // namespace grapple
