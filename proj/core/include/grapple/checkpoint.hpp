#pragma once

#include <string>

#include "grapple/optim.hpp"
#include "grapple/params.hpp"

namespace grapple {

// Self-describing binary container for trained state: a free-form config
// text block, the named parameter grids (float64, row-major,
// little-endian), optional optimizer state, and a free-form RNG state
// block. Both the encoder checkpoints and the reconstruction-model cache
// use this format.
struct Checkpoint {
  std::string config_text;
  ParamStore params;
  bool has_adam = false;
  AdamState adam;
  std::string rng_state;
};

// Current format version, stored after the magic.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace grapple
