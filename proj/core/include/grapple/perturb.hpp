#pragma once

#include <map>
#include <string>
#include <vector>

#include "grapple/matrix.hpp"
#include "grapple/params.hpp"
#include "grapple/rng.hpp"

namespace grapple {

enum class ModelAugKind { identity, weight_prune, layer_drop, head_drop, gaussian_noise };

ModelAugKind model_aug_kind_from_string(const std::string& s);
std::string to_string(ModelAugKind k);

// The realized model augmentation for one forward pass of the perturbed
// branch. Application is read-only on the parameter store: masks, bits and
// noise act as constants on the tape, so the perturbed weights exist only
// as masked views and gradients flow to the shared parameters.
struct PerturbationPlan {
  bool identity = true;
  std::map<std::string, Matrix> weight_masks;  // binary, shapes match params
  std::map<std::string, Matrix> noise_deltas;  // gaussian baseline
  std::vector<int> layer_keep_bits;            // length N_l; empty = all ones
  Matrix head_keep_bits;                       // N_l x N_h; empty = all ones

  int layer_bit(int l) const {
    return layer_keep_bits.empty() ? 1 : layer_keep_bits[l];
  }
  int head_bit(int l, int h) const {
    return head_keep_bits.empty() ? 1 : static_cast<int>(head_keep_bits.at(l, h));
  }
};

// Parameter names eligible for weight pruning / noise: the encoder grids
// except normalization affine pairs. Normalization parameters are excluded
// because zeroing them destabilizes the per-row statistics; the projection
// head and scorer are not part of the encoder.
std::vector<std::string> perturbation_pool(const ParamStore& params);

// Global magnitude pruning, exact: across the concatenated pool the
// ceil(p * |theta|) entries of smallest |value| get mask 0 (ties broken by
// lowest flat position in pool order), everything else 1.
std::map<std::string, Matrix> build_weight_prune_mask(const ParamStore& params,
                                                      const std::vector<std::string>& pool,
                                                      double p);

// Independent Bernoulli(1-p) keep bits for layers (length num_layers).
std::vector<int> sample_layer_bits(int num_layers, double p, RngStream& rng);
// Same for heads, num_layers x num_heads.
Matrix sample_head_bits(int num_layers, int num_heads, double p, RngStream& rng);

// SimGRACE-style baseline: per grid, additive deltas ~ N(0, sigma_scale *
// std(grid)) where std is the population standard deviation of the grid's
// entries (zero-spread grids get zero deltas).
std::map<std::string, Matrix> gaussian_noise_deltas(const ParamStore& params,
                                                    const std::vector<std::string>& pool,
                                                    double sigma_scale, RngStream& rng);

// Counts for run-log summaries.
long long count_zeros(const std::map<std::string, Matrix>& masks);

}  // namespace grapple
