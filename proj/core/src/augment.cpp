#include "grapple/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grapple/error.hpp"

namespace grapple {

std::string to_string(DataAugKind kind) {
  switch (kind) {
    case DataAugKind::identity: return "identity";
    case DataAugKind::pe_mask: return "pe_mask";
    case DataAugKind::selective_node_mask: return "selective_node_mask";
    case DataAugKind::generative: return "generative";
    case DataAugKind::feature_mask_baseline: return "feature_mask_baseline";
  }
  fail("unreachable DataAugKind");
}

DataAugKind data_aug_kind_from_string(const std::string& name) {
  if (name == "identity") return DataAugKind::identity;
  if (name == "pe_mask") return DataAugKind::pe_mask;
  if (name == "selective_node_mask") return DataAugKind::selective_node_mask;
  if (name == "generative") return DataAugKind::generative;
  if (name == "feature_mask_baseline") return DataAugKind::feature_mask_baseline;
  fail("unknown data augmentation kind '" + name + "'");
}

void DataAugSpec::validate() const {
  check(ratio >= 0.0 && ratio <= 1.0, "augment: ratio must lie in [0,1]");
  if (kind == DataAugKind::selective_node_mask)
    check(ratio < 1.0, "augment: selective masking needs ratio < 1");
  check(gumbel_temperature > 0.0, "augment: gumbel_temperature must be positive");
}

std::vector<int> sample_keep_bits(int count, double p, RngStream& rng) {
  check(p >= 0.0 && p <= 1.0, "sample_keep_bits: p must lie in [0,1]");
  std::vector<int> bits(count);
  for (int i = 0; i < count; ++i) bits[i] = rng.bernoulli(1.0 - p) ? 1 : 0;
  return bits;
}

Matrix zero_masked_columns(const Matrix& m, const std::vector<int>& keep_bits) {
  check(static_cast<int>(keep_bits.size()) == m.cols,
        "zero_masked_columns: got " + std::to_string(keep_bits.size()) +
            " bits for " + std::to_string(m.cols) + " columns");
  Matrix out = m;
  for (int j = 0; j < m.cols; ++j) {
    if (keep_bits[j]) continue;
    for (int i = 0; i < m.rows; ++i) out.at(i, j) = 0.0;
  }
  return out;
}

Matrix mask_pe_channels(const Matrix& pe, double p, RngStream& rng,
                        std::vector<int>* bits_out) {
  std::vector<int> bits = sample_keep_bits(pe.cols, p, rng);
  if (bits_out) *bits_out = bits;
  return zero_masked_columns(pe, bits);
}

Matrix feature_mask_baseline(const Matrix& features, double p, RngStream& rng,
                             std::vector<int>* bits_out) {
  std::vector<int> bits = sample_keep_bits(features.cols, p, rng);
  if (bits_out) *bits_out = bits;
  return zero_masked_columns(features, bits);
}

std::vector<int> select_keep_mask(const std::vector<double>& weights,
                                  const GraphBatch& batch, double p) {
  check(static_cast<int>(weights.size()) == batch.total_nodes,
        "select_keep_mask: weight count != node count");
  check(p >= 0.0 && p < 1.0, "select_keep_mask: p must lie in [0,1)");
  std::vector<int> keep(batch.total_nodes, 1);
  for (int g = 0; g < batch.num_graphs; ++g) {
    const int begin = batch.graph_begin(g);
    const int n = batch.graph_sizes[g];
    int k = static_cast<int>(std::ceil(p * n));
    if (k >= n) k = n - 1;  // always keep at least the top-weight node
    if (k <= 0) continue;
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return weights[begin + a] < weights[begin + b];
    });
    for (int r = 0; r < k; ++r) keep[begin + order[r]] = 0;
  }
  return keep;
}

SelectiveMaskResult selective_node_mask_with_noise(
    Tape& tape, const GraphBatch& batch, Var features, const Matrix& pe,
    Var scorer_w, Var scorer_b, double p, double temperature,
    const Matrix& gumbel_noise) {
  const int n = batch.total_nodes;
  check(tape.val(features).rows == n, "selective_node_mask: feature rows != nodes");
  check(pe.rows == n, "selective_node_mask: pe rows != nodes");
  check(gumbel_noise.rows == n && gumbel_noise.cols == 1,
        "selective_node_mask: noise must be total_nodes x 1");
  check(p >= 0.0 && p < 1.0, "selective_node_mask: p must lie in [0,1)");
  check(temperature > 0.0, "selective_node_mask: temperature must be positive");

  // Noisy scores, then a per-graph softmax built from scatter/gather sums.
  // Stability: the per-graph max is read off the eager values and folded in
  // as a constant shift (softmax is shift-invariant).
  Var scores = tape.add(tape.matmul(features, scorer_w),
                        tape.broadcast_row(scorer_b, n));
  Var z = tape.scale(tape.add(scores, tape.constant(gumbel_noise)),
                     1.0 / temperature);
  const Matrix& zval = tape.val(z);
  Matrix shift(n, 1);
  for (int g = 0; g < batch.num_graphs; ++g) {
    double m = zval.at(batch.graph_begin(g), 0);
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i)
      m = std::max(m, zval.at(i, 0));
    for (int i = batch.graph_begin(g); i < batch.graph_end(g); ++i)
      shift.at(i, 0) = m;
  }
  Var e = tape.exp_elem(tape.sub(z, tape.constant(shift)));
  Var graph_sums = tape.scatter_add_rows(e, batch.membership, batch.num_graphs);
  Var soft = tape.div(e, tape.gather_rows(graph_sums, batch.membership));

  // Hard selection from the realized soft weights (constant from here on).
  const Matrix& sval = tape.val(soft);
  std::vector<double> weights(sval.a.begin(), sval.a.end());
  std::vector<int> keep = select_keep_mask(weights, batch, p);

  // Straight-through factor: masked rows scale by 0; kept rows scale by
  // n_g * S_i / (sum of kept S in the graph), which renormalizes the kept
  // weights and is exactly 1 at p=0 with uniform scores.
  Matrix keep01(n, 1);
  Matrix keep_ng(n, 1);
  for (int i = 0; i < n; ++i) {
    keep01.at(i, 0) = keep[i];
    keep_ng.at(i, 0) = keep[i] * static_cast<double>(batch.graph_sizes[batch.membership[i]]);
  }
  Var kept_soft = tape.mul(soft, tape.constant(keep01));
  Var kept_sums = tape.scatter_add_rows(kept_soft, batch.membership, batch.num_graphs);
  Var factor = tape.div(tape.mul(soft, tape.constant(keep_ng)),
                        tape.gather_rows(kept_sums, batch.membership));
  Var factor_cols = tape.matmul(factor, tape.constant(Matrix::ones(1, tape.val(features).cols)));

  SelectiveMaskResult out;
  out.features = tape.mul(features, factor_cols);
  out.soft_weights = soft;
  out.keep_mask = keep;
  out.pe = pe;
  for (int i = 0; i < n; ++i) {
    if (keep[i]) continue;
    for (int j = 0; j < pe.cols; ++j) out.pe.at(i, j) = 0.0;
  }
  return out;
}

SelectiveMaskResult selective_node_mask(Tape& tape, const GraphBatch& batch,
                                        Var features, const Matrix& pe,
                                        Var scorer_w, Var scorer_b, double p,
                                        double temperature, RngStream& rng) {
  Matrix noise(batch.total_nodes, 1);
  for (int i = 0; i < batch.total_nodes; ++i) noise.at(i, 0) = rng.gumbel();
  return selective_node_mask_with_noise(tape, batch, features, pe, scorer_w,
                                        scorer_b, p, temperature, noise);
}

}  // namespace grapple
