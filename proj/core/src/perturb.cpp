#include "grapple/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grapple/error.hpp"

namespace grapple {

ModelAugKind model_aug_kind_from_string(const std::string& s) {
  if (s == "identity") return ModelAugKind::identity;
  if (s == "weight_prune") return ModelAugKind::weight_prune;
  if (s == "layer_drop") return ModelAugKind::layer_drop;
  if (s == "head_drop") return ModelAugKind::head_drop;
  if (s == "gaussian_noise") return ModelAugKind::gaussian_noise;
  fail("unknown model augmentation kind '" + s + "'");
}

std::string to_string(ModelAugKind k) {
  switch (k) {
    case ModelAugKind::identity: return "identity";
    case ModelAugKind::weight_prune: return "weight_prune";
    case ModelAugKind::layer_drop: return "layer_drop";
    case ModelAugKind::head_drop: return "head_drop";
    case ModelAugKind::gaussian_noise: return "gaussian_noise";
  }
  fail("unreachable model augmentation kind");
}

std::vector<std::string> perturbation_pool(const ParamStore& params) {
  std::vector<std::string> pool;
  for (const std::string& name : params.names()) {
    if (name.rfind("enc.", 0) != 0) continue;           // encoder grids only
    if (name.find(".ln") != std::string::npos) continue;  // keep norm affine intact
    pool.push_back(name);
  }
  return pool;
}

std::map<std::string, Matrix> build_weight_prune_mask(const ParamStore& params,
                                                      const std::vector<std::string>& pool,
                                                      double p) {
  check(p >= 0.0 && p < 1.0, "build_weight_prune_mask: ratio " + std::to_string(p) +
                                 " outside [0,1)");
  long long total = 0;
  for (const std::string& name : pool) total += params.at(name).size();
  check(total > 0, "build_weight_prune_mask: empty pruning pool");
  const long long k = static_cast<long long>(std::ceil(p * static_cast<double>(total)));
  check(k < total, "build_weight_prune_mask: would prune the entire pool");

  // Order by |value|, ties by lowest flat position across the pool.
  std::vector<double> magnitude(total);
  long long cursor = 0;
  for (const std::string& name : pool) {
    const Matrix& m = params.at(name);
    for (int i = 0; i < m.size(); ++i) magnitude[cursor++] = std::fabs(m.a[i]);
  }
  std::vector<long long> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](long long a, long long b) {
    return magnitude[a] < magnitude[b];
  });

  std::vector<char> pruned(total, 0);
  for (long long i = 0; i < k; ++i) pruned[order[i]] = 1;

  std::map<std::string, Matrix> masks;
  cursor = 0;
  for (const std::string& name : pool) {
    const Matrix& m = params.at(name);
    Matrix mask = Matrix::ones(m.rows, m.cols);
    for (int i = 0; i < m.size(); ++i)
      if (pruned[cursor++]) mask.a[i] = 0.0;
    masks.emplace(name, std::move(mask));
  }
  return masks;
}

std::vector<int> sample_layer_bits(int num_layers, double p, RngStream& rng) {
  check(num_layers >= 1, "sample_layer_bits: need at least one layer");
  std::vector<int> bits(num_layers);
  for (int l = 0; l < num_layers; ++l) bits[l] = rng.bernoulli(1.0 - p) ? 1 : 0;
  return bits;
}

Matrix sample_head_bits(int num_layers, int num_heads, double p, RngStream& rng) {
  check(num_layers >= 1 && num_heads >= 1, "sample_head_bits: bad dimensions");
  Matrix bits(num_layers, num_heads);
  for (int i = 0; i < bits.size(); ++i) bits.a[i] = rng.bernoulli(1.0 - p) ? 1.0 : 0.0;
  return bits;
}

std::map<std::string, Matrix> gaussian_noise_deltas(const ParamStore& params,
                                                    const std::vector<std::string>& pool,
                                                    double sigma_scale, RngStream& rng) {
  check(sigma_scale > 0.0, "gaussian_noise_deltas: sigma_scale must be positive");
  std::map<std::string, Matrix> deltas;
  for (const std::string& name : pool) {
    const Matrix& m = params.at(name);
    const double mean = mean_all(m);
    double var = 0.0;
    for (double v : m.a) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / m.size());
    Matrix d(m.rows, m.cols);
    // Zero-spread grids (e.g. fresh zero init) get exactly zero deltas, but
    // the draws are still consumed so the stream advances identically.
    for (int i = 0; i < d.size(); ++i) d.a[i] = sigma_scale * sd * rng.normal();
    deltas.emplace(name, std::move(d));
  }
  return deltas;
}

long long count_zeros(const std::map<std::string, Matrix>& masks) {
  long long n = 0;
  for (const auto& [name, m] : masks)
    for (double v : m.a)
      if (v == 0.0) ++n;
  return n;
}

}  // namespace grapple
