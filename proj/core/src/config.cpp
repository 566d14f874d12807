#include "grapple/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "grapple/error.hpp"
#include "grapple/textio.hpp"

namespace grapple {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad(const std::string& loc, const std::string& msg) {
  fail_config(loc + ": " + msg);
}

long long parse_int(const std::string& v, const std::string& loc,
                    const std::string& what) {
  long long out = 0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last) {
    bad(loc, what + " expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& v, const std::string& loc,
                    const std::string& what) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto res = std::from_chars(first, last, out);
  if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(out)) {
    bad(loc, what + " expects a finite number, got '" + v + "'");
  }
  return out;
}

// Applies one key to the config, with full range checking so a bad value is
// rejected where it is written, not deep inside training.
void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& loc) {
  auto as_int = [&](const std::string& what) { return parse_int(value, loc, what); };
  auto as_double = [&](const std::string& what) {
    return parse_double(value, loc, what);
  };
  // Enum names are parsed by the library converters; their failures become
  // config errors with the file location attached.
  auto enum_guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      bad(loc, e.what());
    }
  };

  if (section == "encoder") {
    if (key == "num_layers") {
      long long n = as_int("[encoder].num_layers");
      if (n < 1 || n > 3) bad(loc, "[encoder].num_layers must be 1, 2, or 3");
      cfg.encoder.num_layers = static_cast<int>(n);
    } else if (key == "num_heads") {
      long long n = as_int("[encoder].num_heads");
      if (n < 1) bad(loc, "[encoder].num_heads must be positive");
      cfg.encoder.num_heads = static_cast<int>(n);
    } else if (key == "hidden_dim") {
      long long n = as_int("[encoder].hidden_dim");
      if (n < 1) bad(loc, "[encoder].hidden_dim must be positive");
      cfg.encoder.hidden_dim = static_cast<int>(n);
    } else if (key == "pe_dim") {
      long long n = as_int("[encoder].pe_dim");
      if (n < 1) bad(loc, "[encoder].pe_dim must be positive");
      cfg.encoder.pe_dim = static_cast<int>(n);
    } else {
      bad(loc, "unknown key '" + key + "' in [encoder]");
    }
    return;
  }

  if (section == "train") {
    if (key == "epochs") {
      long long n = as_int("[train].epochs");
      if (n < 0) bad(loc, "[train].epochs must be nonnegative");
      cfg.train.epochs = static_cast<int>(n);
    } else if (key == "batch_size") {
      long long n = as_int("[train].batch_size");
      if (n != 8 && n != 16 && n != 32 && n != 128) {
        bad(loc, "[train].batch_size must be one of 8, 16, 32, 128");
      }
      cfg.train.batch_size = static_cast<int>(n);
    } else if (key == "learning_rate") {
      double d = as_double("[train].learning_rate");
      if (d != 1e-3 && d != 5e-4 && d != 2.5e-4) {
        bad(loc, "[train].learning_rate must be one of 1e-3, 5e-4, 2.5e-4");
      }
      cfg.train.learning_rate = d;
    } else if (key == "temperature") {
      double d = as_double("[train].temperature");
      if (d <= 0.0) bad(loc, "[train].temperature must be positive");
      cfg.train.temperature = d;
    } else if (key == "mode") {
      enum_guard([&] { cfg.train.mode = train_mode_from_string(value); });
    } else if (key == "model_aug") {
      enum_guard([&] { cfg.train.model_kind = model_aug_kind_from_string(value); });
    } else if (key == "model_ratio") {
      double d = as_double("[train].model_ratio");
      if (d < 0.0 || d >= 1.0) bad(loc, "[train].model_ratio must lie in [0,1)");
      cfg.train.model_ratio = d;
    } else if (key == "sigma_scale") {
      double d = as_double("[train].sigma_scale");
      if (d <= 0.0) bad(loc, "[train].sigma_scale must be positive");
      cfg.train.sigma_scale = d;
    } else if (key == "seed") {
      long long n = as_int("[train].seed");
      if (n < 0) bad(loc, "[train].seed must be nonnegative");
      cfg.train.seed = static_cast<unsigned long long>(n);
    } else if (key == "checkpoint_every") {
      long long n = as_int("[train].checkpoint_every");
      if (n < 1) bad(loc, "[train].checkpoint_every must be positive");
      cfg.train.checkpoint_every = static_cast<int>(n);
    } else {
      bad(loc, "unknown key '" + key + "' in [train]");
    }
    return;
  }

  if (section == "augment") {
    if (key == "data_a") {
      enum_guard([&] { cfg.train.data_a.kind = data_aug_kind_from_string(value); });
    } else if (key == "data_b") {
      enum_guard([&] { cfg.train.data_b.kind = data_aug_kind_from_string(value); });
    } else if (key == "ratio") {
      double d = as_double("[augment].ratio");
      if (d < 0.0 || d > 1.0) bad(loc, "[augment].ratio must lie in [0,1]");
      cfg.train.data_a.ratio = d;
      cfg.train.data_b.ratio = d;
    } else if (key == "gumbel_temperature") {
      double d = as_double("[augment].gumbel_temperature");
      if (d <= 0.0) bad(loc, "[augment].gumbel_temperature must be positive");
      cfg.train.data_a.gumbel_temperature = d;
      cfg.train.data_b.gumbel_temperature = d;
    } else if (key == "mae_mask_ratio") {
      double d = as_double("[augment].mae_mask_ratio");
      if (d <= 0.0 || d >= 1.0) bad(loc, "[augment].mae_mask_ratio must lie in (0,1)");
      cfg.train.mae_mask_ratio = d;
    } else if (key == "mae_epochs") {
      long long n = as_int("[augment].mae_epochs");
      if (n < 0) bad(loc, "[augment].mae_epochs must be nonnegative");
      cfg.train.mae_epochs = static_cast<int>(n);
    } else if (key == "mae_hidden_dim") {
      long long n = as_int("[augment].mae_hidden_dim");
      if (n < 1) bad(loc, "[augment].mae_hidden_dim must be positive");
      cfg.train.mae_hidden_dim = static_cast<int>(n);
    } else {
      bad(loc, "unknown key '" + key + "' in [augment]");
    }
    return;
  }

  if (section == "eval") {
    if (key == "folds") {
      long long n = as_int("[eval].folds");
      if (n < 2) bad(loc, "[eval].folds must be at least 2");
      cfg.eval.folds = static_cast<int>(n);
    } else if (key == "seeds") {
      long long n = as_int("[eval].seeds");
      if (n < 1) bad(loc, "[eval].seeds must be at least 1");
      cfg.eval.seeds.clear();
      for (long long s = 0; s < n; ++s) {
        cfg.eval.seeds.push_back(static_cast<unsigned long long>(s));
      }
    } else {
      bad(loc, "unknown key '" + key + "' in [eval]");
    }
    return;
  }

  bad(loc, "unknown section [" + section + "]");
}

// Cross-key constraints checked once all values are in, then the same
// normalization the trainer applies so the echo shows the effective run.
void finalize(RunConfig& cfg) {
  if (cfg.encoder.hidden_dim % cfg.encoder.num_heads != 0) {
    fail_config("[encoder].hidden_dim (" + std::to_string(cfg.encoder.hidden_dim) +
                ") must be divisible by [encoder].num_heads (" +
                std::to_string(cfg.encoder.num_heads) + ")");
  }
  try {
    cfg.train.validate_and_normalize();
    cfg.eval.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail_config(e.what());
  }
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.train.data_a.kind = DataAugKind::selective_node_mask;
  cfg.train.data_b.kind = DataAugKind::selective_node_mask;
  cfg.train.model_kind = ModelAugKind::layer_drop;
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const std::vector<ConfigOverride>& overrides) {
  RunConfig cfg = default_run_config();

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string loc = source + ":" + std::to_string(line_no);
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line[0] == '[') {
      if (line.back() != ']' || line.size() < 3) {
        bad(loc, "malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "encoder" && section != "train" && section != "augment" &&
          section != "eval") {
        bad(loc, "unknown section [" + section + "]");
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bad(loc, "expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) bad(loc, "missing key before '='");
    if (value.empty()) bad(loc, "missing value for key '" + key + "'");
    if (section.empty()) bad(loc, "key '" + key + "' appears before any section");
    apply_key(cfg, section, key, value, loc);
  }

  for (const auto& ov : overrides) {
    apply_key(cfg, ov.section, ov.key, ov.value,
              "override " + ov.section + "." + ov.key);
  }

  finalize(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path,
                      const std::vector<ConfigOverride>& overrides) {
  if (path.empty()) return parse_config_text("", "<defaults>", overrides);
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_config("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path, overrides);
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[encoder]\n";
  out << "num_layers = " << cfg.encoder.num_layers << "\n";
  out << "num_heads = " << cfg.encoder.num_heads << "\n";
  out << "hidden_dim = " << cfg.encoder.hidden_dim << "\n";
  out << "pe_dim = " << cfg.encoder.pe_dim << "\n";
  out << "\n[train]\n";
  out << "epochs = " << cfg.train.epochs << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out << "learning_rate = " << fmt_shortest(cfg.train.learning_rate) << "\n";
  out << "temperature = " << fmt_shortest(cfg.train.temperature) << "\n";
  out << "mode = " << to_string(cfg.train.mode) << "\n";
  out << "model_aug = " << to_string(cfg.train.model_kind) << "\n";
  out << "model_ratio = " << fmt_shortest(cfg.train.model_ratio) << "\n";
  out << "sigma_scale = " << fmt_shortest(cfg.train.sigma_scale) << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "checkpoint_every = " << cfg.train.checkpoint_every << "\n";
  out << "\n[augment]\n";
  out << "data_a = " << to_string(cfg.train.data_a.kind) << "\n";
  out << "data_b = " << to_string(cfg.train.data_b.kind) << "\n";
  out << "ratio = " << fmt_shortest(cfg.train.data_a.ratio) << "\n";
  out << "gumbel_temperature = " << fmt_shortest(cfg.train.data_a.gumbel_temperature)
      << "\n";
  out << "mae_mask_ratio = " << fmt_shortest(cfg.train.mae_mask_ratio) << "\n";
  out << "mae_epochs = " << cfg.train.mae_epochs << "\n";
  out << "mae_hidden_dim = " << cfg.train.mae_hidden_dim << "\n";
  out << "\n[eval]\n";
  out << "folds = " << cfg.eval.folds << "\n";
  out << "seeds = " << cfg.eval.seeds.size() << "\n";
  return out.str();
}

}  // namespace grapple
