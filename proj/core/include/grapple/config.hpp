#pragma once

#include <string>
#include <vector>

#include "grapple/encoder.hpp"
#include "grapple/probe.hpp"
#include "grapple/trainer.hpp"

namespace grapple {

// One key/value pair applied after the file, e.g. from a --set flag.
struct ConfigOverride {
  std::string section;
  std::string key;
  std::string value;
};

// Everything a run needs that is not an input path: encoder shape, training
// schedule, augmentation choices, probe protocol. Serialized as a small INI
// dialect with sections [encoder], [train], [augment], [eval]; keys are
// "key = value" lines; comments are full lines starting with '#' or ';'.
// Unknown sections or keys are rejected with their line number, as are
// out-of-range values (named like "[augment].ratio").
//
// The [augment] keys `ratio` and `gumbel_temperature` are shared by both
// data views, so the echo assumes data_a and data_b agree on them (the
// config path keeps them equal by construction).
struct RunConfig {
  EncoderConfig encoder;  // input_dim stays 0 here; it comes from the dataset
  TrainConfig train;
  ProbeConfig eval;
};

// Defaults used when no config file is given: the dual objective with
// selective node masking on the data side and layer dropping on the model
// side, ratio 0.2, hidden 64, 100 epochs, temperature 0.2, 8 PE channels.
RunConfig default_run_config();

// Parses `text` (section/key dialect above), applies `overrides`, then
// validates and normalizes. `source` labels error messages ("cfg.ini:%d").
RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const std::vector<ConfigOverride>& overrides = {});

// Reads the file (empty path = start from defaults) and delegates to
// parse_config_text. All failures are ConfigError.
RunConfig load_config(const std::string& path,
                      const std::vector<ConfigOverride>& overrides = {});

// Effective-config echo: parse_config_text(render_config(c)) round-trips
// exactly. This is the text stored inside checkpoints.
std::string render_config(const RunConfig& cfg);

}  // namespace grapple
