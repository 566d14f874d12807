// Command-line surface for the contrastive graph-representation engine.
// One process runs one verb: pretrain, embed, probe, diagnose, gradcheck,
// or augment-preview. Exit status: 0 success, 1 runtime failure, 2
// configuration error (bad flags, bad config file, missing inputs).

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "grapple/augment.hpp"
#include "grapple/checkpoint.hpp"
#include "grapple/config.hpp"
#include "grapple/contrastive.hpp"
#include "grapple/embed_io.hpp"
#include "grapple/encoder.hpp"
#include "grapple/error.hpp"
#include "grapple/gradcheck.hpp"
#include "grapple/graph.hpp"
#include "grapple/mae.hpp"
#include "grapple/metrics.hpp"
#include "grapple/perturb.hpp"
#include "grapple/probe.hpp"
#include "grapple/rwse.hpp"
#include "grapple/synthetic.hpp"
#include "grapple/textio.hpp"
#include "grapple/trainer.hpp"
#include "grapple/tu_io.hpp"

namespace fs = std::filesystem;
using namespace grapple;

namespace {

// Stream ids, matching the trainer's allocation so standalone verbs draw
// the same initial parameters a run would.
constexpr uint64_t kStreamInit = 11;
constexpr uint64_t kStreamAug = 13;
constexpr uint64_t kStreamPlan = 14;
constexpr uint64_t kStreamMae = 15;
constexpr uint64_t kStreamGradCoords = 22;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;  // raw "section.key=value" strings
  std::string dataset_arg = "synthetic";
  std::string data_root;
  std::string out_dir;
  std::string run_dir;
  std::string checkpoint_path;
  // Convenience flags; kept as strings so the value text reaches the config
  // parser verbatim and is validated exactly like a file line.
  std::string epochs, seed, batch_size, lr, mode, data_aug, model_aug, ratio,
      temperature;
};

ConfigOverride parse_set(const std::string& s) {
  const size_t dot = s.find('.');
  const size_t eq = s.find('=');
  if (dot == std::string::npos || eq == std::string::npos || dot == 0 ||
      eq < dot + 2 || eq + 1 > s.size()) {
    fail_config("--set expects section.key=value, got '" + s + "'");
  }
  return ConfigOverride{s.substr(0, dot), s.substr(dot + 1, eq - dot - 1),
                        s.substr(eq + 1)};
}

std::vector<ConfigOverride> collect_overrides(const CommonOpts& o) {
  std::vector<ConfigOverride> out;
  for (const auto& s : o.sets) out.push_back(parse_set(s));
  auto sugar = [&](const char* section, const char* key, const std::string& v) {
    if (!v.empty()) out.push_back(ConfigOverride{section, key, v});
  };
  sugar("train", "epochs", o.epochs);
  sugar("train", "seed", o.seed);
  sugar("train", "batch_size", o.batch_size);
  sugar("train", "learning_rate", o.lr);
  sugar("train", "mode", o.mode);
  sugar("train", "model_aug", o.model_aug);
  sugar("train", "temperature", o.temperature);
  sugar("augment", "data_a", o.data_aug);
  sugar("augment", "data_b", o.data_aug);
  sugar("augment", "ratio", o.ratio);
  return out;
}

struct DatasetChoice {
  bool synthetic = false;
  std::string name;
  int count = 500;
  uint64_t seed = 7;
};

long long parse_ll(const std::string& v, const std::string& what) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    fail_config(what + " expects an integer, got '" + v + "'");
  }
  return out;
}

// "MUTAG" | "PROTEINS" | ... | "synthetic[:count[:seed]]"
DatasetChoice parse_dataset_arg(const std::string& s) {
  DatasetChoice c;
  if (s != "synthetic" && s.rfind("synthetic:", 0) != 0) {
    check_config(!s.empty(), "--dataset must not be empty");
    c.name = s;
    return c;
  }
  c.synthetic = true;
  c.name = "synthetic";
  if (s.size() > std::string("synthetic").size()) {
    std::string rest = s.substr(std::string("synthetic:").size());
    const size_t colon = rest.find(':');
    const std::string count_str = rest.substr(0, colon);
    long long n = parse_ll(count_str, "synthetic graph count");
    check_config(n >= 2, "synthetic graph count must be at least 2");
    c.count = static_cast<int>(n);
    if (colon != std::string::npos) {
      long long sd = parse_ll(rest.substr(colon + 1), "synthetic seed");
      check_config(sd >= 0, "synthetic seed must be nonnegative");
      c.seed = static_cast<uint64_t>(sd);
    }
  }
  return c;
}

std::string resolve_data_root(const CommonOpts& o) {
  if (!o.data_root.empty()) return o.data_root;
  if (const char* env = std::getenv("GRAPPLE_DATA_ROOT")) {
    if (*env) return env;
  }
  return "data";
}

Dataset load_dataset_choice(const CommonOpts& o) {
  const DatasetChoice c = parse_dataset_arg(o.dataset_arg);
  if (c.synthetic) {
    Dataset ds;
    ds.name = "synthetic";
    ds.graphs = generate_synthetic_dataset(c.count, SyntheticSpec{}, c.seed);
    ds.num_classes = 2;
    ds.feature_dim = 1;
    ds.has_node_labels = false;
    return ds;
  }
  const fs::path dir = fs::path(resolve_data_root(o)) / c.name;
  check_config(fs::exists(dir), "dataset directory not found: " + dir.string());
  return parse_tu_dataset(dir.string(), c.name);
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "cannot open for writing: " + path.string());
  out << content;
  out.flush();
  check(out.good(), "write failed: " + path.string());
}

std::string rel_to(const fs::path& p, const fs::path& base) {
  std::error_code ec;
  fs::path r = fs::relative(p, base, ec);
  if (ec || r.empty()) return p.generic_string();
  return r.generic_string();
}

// Every command appends one block to <out>/manifest.txt recording what it
// ran and which artifacts it produced, so a run can be replayed from the
// directory alone.
void append_manifest(const fs::path& out_dir, const std::string& verb,
                     const std::vector<std::pair<std::string, std::string>>& info,
                     const std::vector<std::string>& artifacts) {
  std::ofstream f(out_dir / "manifest.txt", std::ios::binary | std::ios::app);
  check(f.good(), "cannot open manifest for writing: " +
                      (out_dir / "manifest.txt").string());
  f << "[" << verb << "]\n";
  for (const auto& [k, v] : info) f << k << " = " << v << "\n";
  for (const auto& a : artifacts) f << "artifact = " << a << "\n";
  f << "\n";
}

std::optional<int> checkpoint_epoch(const fs::path& p) {
  const std::string name = p.filename().string();
  const std::string prefix = "epoch_";
  const std::string suffix = ".ckpt";
  if (name.size() <= prefix.size() + suffix.size()) return std::nullopt;
  if (name.rfind(prefix, 0) != 0) return std::nullopt;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  const std::string digits =
      name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  int epoch = 0;
  auto res = std::from_chars(digits.data(), digits.data() + digits.size(), epoch);
  if (res.ec != std::errc{} || res.ptr != digits.data() + digits.size()) {
    return std::nullopt;
  }
  return epoch;
}

// All epoch checkpoints under <run>/checkpoints, ascending by epoch.
std::vector<std::pair<int, fs::path>> list_epoch_checkpoints(const std::string& run) {
  check_config(!run.empty(), "need --run <dir> pointing at a pretrain output");
  const fs::path dir = fs::path(run) / "checkpoints";
  check_config(fs::exists(dir), "checkpoint directory not found: " + dir.string());
  std::vector<std::pair<int, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (auto e = checkpoint_epoch(entry.path())) out.emplace_back(*e, entry.path());
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  check_config(!out.empty(), "no epoch checkpoints found under " + dir.string());
  return out;
}

std::string resolve_checkpoint(const CommonOpts& o) {
  if (!o.checkpoint_path.empty()) {
    check_config(fs::exists(o.checkpoint_path),
                 "checkpoint not found: " + o.checkpoint_path);
    return o.checkpoint_path;
  }
  check_config(!o.run_dir.empty(), "need --checkpoint <file> or --run <dir>");
  return list_epoch_checkpoints(o.run_dir).back().second.string();
}

std::string resolve_out(const CommonOpts& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  if (!o.run_dir.empty()) return o.run_dir;
  fail_config("need --out <dir> (or --run, whose directory receives the artifacts)");
}

void reject_config_flag(const CommonOpts& o, const char* verb) {
  check_config(o.config_path.empty(),
               std::string(verb) +
                   " reads its configuration from the checkpoint; use --set "
                   "for adjustments instead of --config");
}

// ---------------------------------------------------------------- pretrain

int cmd_pretrain(const CommonOpts& o) {
  const RunConfig cfg = load_config(o.config_path, collect_overrides(o));
  const Dataset ds = load_dataset_choice(o);
  check_config(ds.graphs.size() >= 2, "pretraining needs at least 2 graphs");
  check_config(!o.out_dir.empty(), "need --out <dir> for the run artifacts");

  fs::create_directories(o.out_dir);
  const std::string config_text = render_config(cfg);
  write_text_file(fs::path(o.out_dir) / "config.ini", config_text);

  std::cout << "pretrain: dataset " << ds.name << " (" << ds.graphs.size()
            << " graphs, feature dim " << ds.feature_dim << ")\n";
  std::cout << "pretrain: mode " << to_string(cfg.train.mode) << ", "
            << cfg.train.epochs << " epochs, seed " << cfg.train.seed << "\n"
            << std::flush;

  const PretrainArtifacts art =
      pretrain(ds, cfg.train, cfg.encoder, o.out_dir, config_text);

  std::vector<std::string> artifacts = {"config.ini"};
  artifacts.push_back(rel_to(art.metric_log, o.out_dir));
  artifacts.push_back(rel_to(art.plan_log, o.out_dir));
  const fs::path mae_path = fs::path(o.out_dir) / "checkpoints" / "mae.ckpt";
  if (fs::exists(mae_path)) artifacts.push_back(rel_to(mae_path, o.out_dir));
  for (const auto& [epoch, path] : art.checkpoints) {
    artifacts.push_back(rel_to(path, o.out_dir));
  }
  append_manifest(o.out_dir, "pretrain",
                  {{"dataset", o.dataset_arg},
                   {"data_root", resolve_data_root(o)},
                   {"seed", std::to_string(cfg.train.seed)},
                   {"mode", to_string(cfg.train.mode)},
                   {"epochs", std::to_string(cfg.train.epochs)}},
                  artifacts);

  if (!art.records.empty()) {
    const EpochRecord& last = art.records.back();
    std::cout << "pretrain: epoch " << last.epoch << " mean loss "
              << fmt_shortest(last.mean_loss) << "\n";
  }
  std::cout << "pretrain: wrote " << art.checkpoints.size() << " checkpoints, "
            << rel_to(art.metric_log, ".") << ", " << rel_to(art.plan_log, ".")
            << "\n";
  return 0;
}

// ------------------------------------------------------------ embed/probe

struct EmbedProducts {
  RunConfig cfg;
  Dataset dataset;
  EmbeddingTable table;
  std::string checkpoint_path;
  std::string table_rel;  // path relative to the output dir
};

// Shared front half of `embed` and `probe`: load checkpoint, rebuild the
// encoder configuration from its embedded text, embed the dataset, persist
// the table under <out>/embeddings/.
EmbedProducts embed_from_checkpoint(const CommonOpts& o, const char* verb) {
  reject_config_flag(o, verb);
  EmbedProducts p;
  p.checkpoint_path = resolve_checkpoint(o);
  const Checkpoint ckpt = load_checkpoint(p.checkpoint_path);
  p.cfg = parse_config_text(ckpt.config_text, "checkpoint config",
                            collect_overrides(o));
  p.dataset = load_dataset_choice(o);

  EncoderConfig ecfg = p.cfg.encoder;
  ecfg.input_dim = p.dataset.feature_dim;
  p.table = embed_dataset(p.dataset, ckpt.params, ecfg);

  const std::string out = resolve_out(o);
  fs::create_directories(fs::path(out) / "embeddings");
  p.table_rel = "embeddings/" + p.dataset.name + "_" +
                fs::path(p.checkpoint_path).stem().string() + ".csv";
  write_embedding_table((fs::path(out) / p.table_rel).string(), p.table);
  write_text_file(fs::path(out) / "config.ini", render_config(p.cfg));
  return p;
}

int cmd_embed(const CommonOpts& o) {
  const EmbedProducts p = embed_from_checkpoint(o, "embed");
  const std::string out = resolve_out(o);
  append_manifest(out, "embed",
                  {{"dataset", o.dataset_arg},
                   {"checkpoint", p.checkpoint_path},
                   {"seed", std::to_string(p.cfg.train.seed)}},
                  {"config.ini", p.table_rel});
  std::cout << "embed: wrote " << (fs::path(out) / p.table_rel).string() << " ("
            << p.table.rows.rows << " rows, dim " << p.table.rows.cols << ", "
            << p.table.num_classes << " classes)\n";
  return 0;
}

int cmd_probe(const CommonOpts& o) {
  const EmbedProducts p = embed_from_checkpoint(o, "probe");
  const std::string out = resolve_out(o);
  const ProbeResult res = linear_probe_cv(p.table, p.cfg.eval);

  fs::create_directories(fs::path(out) / "reports");
  std::ostringstream txt;
  txt << "dataset = " << p.dataset.name << "\n";
  txt << "checkpoint = " << p.checkpoint_path << "\n";
  txt << "embeddings = " << p.table_rel << "\n";
  txt << "rows = " << p.table.rows.rows << "\n";
  txt << "folds = " << p.cfg.eval.folds << "\n";
  txt << "seeds = " << p.cfg.eval.seeds.size() << "\n";
  txt << "accuracy_mean = " << fmt17(res.mean_accuracy) << "\n";
  txt << "accuracy_std = " << fmt17(res.std_accuracy) << "\n";
  for (size_t s = 0; s < res.per_seed.size(); ++s) {
    txt << "seed " << p.cfg.eval.seeds[s] << " mean = " << fmt17(res.per_seed[s])
        << "\n";
  }
  write_text_file(fs::path(out) / "reports" / "probe.txt", txt.str());

  std::ostringstream csv;  // seed,fold,accuracy — data rows only
  for (size_t s = 0; s < res.per_seed_fold.size(); ++s) {
    for (size_t f = 0; f < res.per_seed_fold[s].size(); ++f) {
      csv << p.cfg.eval.seeds[s] << "," << f << ","
          << fmt17(res.per_seed_fold[s][f]) << "\n";
    }
  }
  write_text_file(fs::path(out) / "reports" / "probe.csv", csv.str());

  append_manifest(out, "probe",
                  {{"dataset", o.dataset_arg},
                   {"checkpoint", p.checkpoint_path},
                   {"folds", std::to_string(p.cfg.eval.folds)},
                   {"seeds", std::to_string(p.cfg.eval.seeds.size())}},
                  {"config.ini", p.table_rel, "reports/probe.txt",
                   "reports/probe.csv"});

  char line[128];
  std::snprintf(line, sizeof line, "probe: accuracy %.4f +/- %.4f",
                res.mean_accuracy, res.std_accuracy);
  std::cout << line << " (" << p.cfg.eval.folds << " folds x "
            << p.cfg.eval.seeds.size() << " seeds)\n";
  std::cout << "probe: report " << (fs::path(out) / "reports" / "probe.txt").string()
            << "\n";
  return 0;
}

// ----------------------------------------------------------------- diagnose

int cmd_diagnose(const CommonOpts& o) {
  reject_config_flag(o, "diagnose");
  const auto listed = list_epoch_checkpoints(o.run_dir);
  std::vector<std::pair<int, Checkpoint>> series;
  series.reserve(listed.size());
  for (const auto& [epoch, path] : listed) {
    series.emplace_back(epoch, load_checkpoint(path.string()));
  }

  const RunConfig cfg = parse_config_text(series.back().second.config_text,
                                          "checkpoint config", collect_overrides(o));
  const Dataset ds = load_dataset_choice(o);
  EncoderConfig ecfg = cfg.encoder;
  ecfg.input_dim = ds.feature_dim;

  MaeLiteModel mae;
  const MaeLiteModel* mae_ptr = nullptr;
  if (cfg.train.data_a.kind == DataAugKind::generative ||
      cfg.train.data_b.kind == DataAugKind::generative) {
    const fs::path mpath = fs::path(o.run_dir) / "checkpoints" / "mae.ckpt";
    check_config(fs::exists(mpath),
                 "reconstruction-model checkpoint not found: " + mpath.string());
    mae = mae_from_checkpoint(load_checkpoint(mpath.string()));
    mae_ptr = &mae;
  }

  const auto traj = alignment_uniformity_trajectory(ds, series, cfg.train, ecfg,
                                                    mae_ptr, cfg.train.seed);

  const std::string out = resolve_out(o);
  fs::create_directories(fs::path(out) / "reports");
  std::ostringstream csv;  // epoch,alignment,uniformity — data rows only
  for (const auto& pt : traj) {
    csv << pt.epoch << "," << fmt17(pt.alignment) << "," << fmt17(pt.uniformity)
        << "\n";
  }
  write_text_file(fs::path(out) / "reports" / "trajectory.csv", csv.str());

  append_manifest(out, "diagnose",
                  {{"dataset", o.dataset_arg},
                   {"run", o.run_dir},
                   {"checkpoints", std::to_string(series.size())}},
                  {"reports/trajectory.csv"});

  char line[160];
  std::snprintf(line, sizeof line,
                "diagnose: alignment %.6f -> %.6f, uniformity %.6f -> %.6f",
                traj.front().alignment, traj.back().alignment,
                traj.front().uniformity, traj.back().uniformity);
  std::cout << "diagnose: " << series.size() << " checkpoints (epochs "
            << series.front().first << ".." << series.back().first << ")\n";
  std::cout << line << "\n";
  std::cout << "diagnose: wrote "
            << (fs::path(out) / "reports" / "trajectory.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const CommonOpts& o, int coords, double step, double tolerance) {
  const RunConfig cfg = load_config(o.config_path, collect_overrides(o));
  const TrainConfig& tcfg = cfg.train;

  // Small fixed batch: three synthetic graphs (constant single feature).
  const auto graphs = generate_synthetic_dataset(3, SyntheticSpec{}, 7);
  const GraphBatch batch = batch_graphs(graphs);
  EncoderConfig ecfg = cfg.encoder;
  ecfg.input_dim = batch.node_features.cols;
  ecfg.validate();

  ParamStore params;
  RngStream rng_init(tcfg.seed, kStreamInit);
  add_encoder_params(params, ecfg, rng_init);
  add_projection_params(params, ecfg, rng_init);
  add_scorer_params(params, ecfg, rng_init);

  const Matrix pe = compute_rwse_batch(batch, ecfg.pe_dim);
  const BatchWiring wiring = build_wiring(batch);

  MaeLiteModel mae;
  const MaeLiteModel* mae_ptr = nullptr;
  if (tcfg.data_a.kind == DataAugKind::generative ||
      tcfg.data_b.kind == DataAugKind::generative) {
    RngStream rng_mae(tcfg.seed, kStreamMae);
    mae = make_mae_model(ecfg.input_dim, tcfg.mae_hidden_dim, rng_mae);
    Dataset tiny;
    tiny.name = "gradcheck";
    tiny.graphs = graphs;
    tiny.num_classes = 2;
    tiny.feature_dim = ecfg.input_dim;
    pretrain_mae(mae, tiny, tcfg.mae_mask_ratio, tcfg.mae_epochs, tcfg.batch_size,
                 tcfg.learning_rate, rng_mae);
    mae_ptr = &mae;
  }

  // The weight-level perturbation plan is built once, from the initial
  // parameters, and treated as a constant across finite-difference probes.
  PerturbationPlan plan;
  RngStream rng_plan(tcfg.seed, kStreamPlan);
  if (tcfg.model_kind == ModelAugKind::weight_prune) {
    plan.weight_masks =
        build_weight_prune_mask(params, perturbation_pool(params), tcfg.model_ratio);
    plan.identity = false;
  } else if (tcfg.model_kind == ModelAugKind::gaussian_noise) {
    plan.noise_deltas = gaussian_noise_deltas(params, perturbation_pool(params),
                                              tcfg.sigma_scale, rng_plan);
    plan.identity = false;
  }

  // Freeze every stochastic draw: the closure copies this stream, so all
  // evaluations see identical augmentations and structural bits.
  const RngStream rng_aug_frozen(tcfg.seed, kStreamAug);

  const GradFn fn = [&](const ParamStore& ps, std::vector<Matrix>* grads) {
    Tape tape;
    const LiftedParams lifted = lift_params(tape, ps, grads != nullptr);
    ForwardContext ctx;
    ctx.batch = &batch;
    ctx.pe = &pe;
    ctx.cfg = &ecfg;
    ctx.params = &lifted;
    ctx.wiring = &wiring;
    ctx.plan = &plan;
    ctx.model_kind = tcfg.model_kind;
    ctx.model_ratio = tcfg.model_ratio;
    ctx.spec_a = tcfg.data_a;
    ctx.spec_b = tcfg.data_b;
    ctx.mae = mae_ptr;
    RngStream rng = rng_aug_frozen;
    const FourViewEmbeddings views = four_view_forward(tape, ctx, tcfg.mode, rng);
    const MultiViewLoss loss = multi_view_loss(tape, views, tcfg.temperature,
                                               tcfg.mode);
    const double value = tape.val(loss.total).scalar();
    if (grads) {
      tape.backward(loss.total);
      grads->clear();
      for (int i = 0; i < params.count(); ++i) {
        grads->push_back(tape.grad(lifted.at(params.name(i))));
      }
    }
    return value;
  };

  RngStream rng_coords(tcfg.seed, kStreamGradCoords);
  const GradCheckReport rep = finite_diff_check(fn, params, step, coords, rng_coords);
  const bool pass = rep.max_rel_error < tolerance;

  std::ostringstream txt;
  txt << "coords = " << rep.coords_checked << "\n";
  txt << "step = " << fmt_shortest(step) << "\n";
  txt << "tolerance = " << fmt_shortest(tolerance) << "\n";
  txt << "max_relative_error = " << fmt17(rep.max_rel_error) << "\n";
  txt << "worst_param = " << rep.worst_param << "\n";
  txt << "worst_flat_index = " << rep.worst_flat_index << "\n";
  txt << "result = " << (pass ? "PASS" : "FAIL") << "\n";
  std::cout << "gradcheck: mode " << to_string(tcfg.mode) << ", data "
            << to_string(tcfg.data_a.kind) << "/" << to_string(tcfg.data_b.kind)
            << ", model " << to_string(tcfg.model_kind) << "\n";
  std::cout << "gradcheck: max relative error " << fmt17(rep.max_rel_error)
            << " over " << rep.coords_checked << " coordinates (worst: "
            << rep.worst_param << "[" << rep.worst_flat_index << "])\n";
  std::cout << "gradcheck: " << (pass ? "PASS" : "FAIL") << " (tolerance "
            << fmt_shortest(tolerance) << ")\n";

  if (!o.out_dir.empty()) {
    fs::create_directories(fs::path(o.out_dir) / "reports");
    write_text_file(fs::path(o.out_dir) / "reports" / "gradcheck.txt", txt.str());
    write_text_file(fs::path(o.out_dir) / "config.ini", render_config(cfg));
    append_manifest(o.out_dir, "gradcheck",
                    {{"coords", std::to_string(rep.coords_checked)},
                     {"result", pass ? "PASS" : "FAIL"}},
                    {"config.ini", "reports/gradcheck.txt"});
  }
  return pass ? 0 : 1;
}

// ----------------------------------------------------------- augment-preview

std::string matrix_row_str(const Matrix& m, int r, int max_cols = 12) {
  std::ostringstream os;
  os << "[";
  const int cols = std::min(m.cols, max_cols);
  for (int c = 0; c < cols; ++c) os << (c ? " " : "") << fmt_shortest(m.at(r, c));
  if (m.cols > cols) os << " ...";
  os << "]";
  return os.str();
}

void dump_rows(std::ostream& os, const Matrix& before, const Matrix& after,
               int begin, int end, int max_rows = 8) {
  const int last = std::min(end, begin + max_rows);
  for (int r = begin; r < last; ++r) {
    os << "    node " << (r - begin) << ": " << matrix_row_str(before, r) << " -> "
       << matrix_row_str(after, r) << "\n";
  }
  if (end > last) os << "    ... (" << (end - last) << " more rows)\n";
}

int cmd_augment_preview(const CommonOpts& o) {
  const RunConfig cfg = load_config(o.config_path, collect_overrides(o));
  const TrainConfig& tcfg = cfg.train;
  const Dataset ds = load_dataset_choice(o);
  check_config(ds.graphs.size() >= 2, "preview needs at least 2 graphs");

  const auto chunks =
      make_batch_index_chunks(static_cast<int>(ds.graphs.size()), tcfg.batch_size);
  std::vector<Graph> first;
  for (int idx : chunks.front()) first.push_back(ds.graphs[idx]);
  const GraphBatch batch = batch_graphs(first);
  const Matrix pe = compute_rwse_batch(batch, cfg.encoder.pe_dim);

  EncoderConfig ecfg = cfg.encoder;
  ecfg.input_dim = ds.feature_dim;
  ParamStore params;
  RngStream rng_init(tcfg.seed, kStreamInit);
  add_encoder_params(params, ecfg, rng_init);
  add_projection_params(params, ecfg, rng_init);
  add_scorer_params(params, ecfg, rng_init);

  MaeLiteModel mae;
  bool has_mae = false;
  if (tcfg.data_a.kind == DataAugKind::generative ||
      tcfg.data_b.kind == DataAugKind::generative) {
    RngStream rng_mae(tcfg.seed, kStreamMae);
    mae = make_mae_model(ds.feature_dim, tcfg.mae_hidden_dim, rng_mae);
    pretrain_mae(mae, ds, tcfg.mae_mask_ratio, tcfg.mae_epochs, tcfg.batch_size,
                 tcfg.learning_rate, rng_mae);
    has_mae = true;
  }

  RngStream rng_aug(tcfg.seed, kStreamAug);
  RngStream rng_plan(tcfg.seed, kStreamPlan);
  Tape tape;
  const LiftedParams lifted = lift_params(tape, params, false);

  std::ostringstream rep;
  rep << "batch: graphs=" << batch.num_graphs << " nodes=" << batch.total_nodes
      << " feature_dim=" << ds.feature_dim << " pe_dim=" << cfg.encoder.pe_dim
      << "\n";
  const int g0 = batch.graph_sizes[0];
  rep << "graph 0: nodes=" << g0 << " label=" << batch.labels[0] << "\n";
  if (has_mae) {
    rep << "reconstruction model: hidden_dim=" << tcfg.mae_hidden_dim
        << " trained for " << tcfg.mae_epochs << " epochs\n";
  }

  const auto preview_view = [&](const char* name, const DataAugSpec& spec) {
    rep << "\ndata view " << name << ": kind=" << to_string(spec.kind)
        << " ratio=" << fmt_shortest(spec.ratio) << "\n";
    switch (spec.kind) {
      case DataAugKind::identity:
        rep << "  features and positional channels unchanged\n";
        break;
      case DataAugKind::pe_mask: {
        std::vector<int> bits;
        const Matrix masked = mask_pe_channels(pe, spec.ratio, rng_aug, &bits);
        int dropped = 0;
        std::ostringstream idx;
        for (size_t i = 0; i < bits.size(); ++i) {
          if (bits[i] == 0) {
            idx << (dropped ? " " : "") << i;
            ++dropped;
          }
        }
        rep << "  positional channels zeroed: " << dropped << "/" << bits.size()
            << (dropped ? " (channels " + idx.str() + ")" : "") << "\n";
        rep << "  graph 0 positional rows before/after:\n";
        dump_rows(rep, pe, masked, 0, g0);
        break;
      }
      case DataAugKind::feature_mask_baseline: {
        std::vector<int> bits;
        const Matrix masked =
            feature_mask_baseline(batch.node_features, spec.ratio, rng_aug, &bits);
        int dropped = 0;
        for (int b : bits) dropped += b == 0 ? 1 : 0;
        rep << "  feature columns zeroed: " << dropped << "/" << bits.size() << "\n";
        rep << "  graph 0 feature rows before/after:\n";
        dump_rows(rep, batch.node_features, masked, 0, g0);
        break;
      }
      case DataAugKind::selective_node_mask: {
        const auto res = selective_node_mask(
            tape, batch, tape.constant(batch.node_features), pe,
            lifted.at("scorer.w"), lifted.at("scorer.b"), spec.ratio,
            spec.gumbel_temperature, rng_aug);
        int masked = 0;
        for (int b : res.keep_mask) masked += b == 0 ? 1 : 0;
        rep << "  nodes masked: " << masked << "/" << batch.total_nodes
            << " (per graph, the ceil(p*n) lowest-scored)\n";
        std::ostringstream idx;
        int shown = 0;
        for (int i = 0; i < g0; ++i) {
          if (res.keep_mask[static_cast<size_t>(i)] == 0) {
            idx << (shown ? " " : "") << i;
            ++shown;
          }
        }
        rep << "  graph 0 masked nodes: " << (shown ? idx.str() : "(none)") << "\n";
        rep << "  graph 0 feature rows before/after (kept rows rescaled):\n";
        dump_rows(rep, batch.node_features, tape.val(res.features), 0, g0);
        break;
      }
      case DataAugKind::generative: {
        std::vector<int> replaced;
        const Matrix out =
            generative_augment(batch, mae, spec.ratio, rng_aug, &replaced);
        rep << "  feature rows replaced by reconstructions: " << replaced.size()
            << "/" << batch.total_nodes << "\n";
        rep << "  graph 0 feature rows before/after:\n";
        dump_rows(rep, batch.node_features, out, 0, g0);
        break;
      }
    }
  };
  preview_view("A", tcfg.data_a);
  preview_view("B", tcfg.data_b);

  rep << "\nmodel view: kind=" << to_string(tcfg.model_kind) << "\n";
  switch (tcfg.model_kind) {
    case ModelAugKind::identity:
      rep << "  encoder weights unchanged\n";
      break;
    case ModelAugKind::weight_prune: {
      const auto masks =
          build_weight_prune_mask(params, perturbation_pool(params), tcfg.model_ratio);
      long long total = 0;
      for (const auto& [name, m] : masks) total += m.size();
      rep << "  pruned weights: " << count_zeros(masks) << "/" << total << " across "
          << masks.size() << " grids (ratio " << fmt_shortest(tcfg.model_ratio)
          << ", smallest magnitudes)\n";
      break;
    }
    case ModelAugKind::gaussian_noise: {
      const auto deltas = gaussian_noise_deltas(params, perturbation_pool(params),
                                                tcfg.sigma_scale, rng_plan);
      long long total = 0;
      for (const auto& [name, m] : deltas) total += m.size();
      rep << "  noise added to " << total << " weights across " << deltas.size()
          << " grids (sigma_scale " << fmt_shortest(tcfg.sigma_scale) << ")\n";
      break;
    }
    case ModelAugKind::layer_drop: {
      const auto bits =
          sample_layer_bits(cfg.encoder.num_layers, tcfg.model_ratio, rng_aug);
      int dropped = 0;
      std::ostringstream idx;
      for (size_t l = 0; l < bits.size(); ++l) {
        if (bits[l] == 0) {
          idx << (dropped ? " " : "") << l;
          ++dropped;
        }
      }
      rep << "  layers dropped this pass: " << dropped << "/" << bits.size()
          << (dropped ? " (layers " + idx.str() + ")" : "") << "\n";
      break;
    }
    case ModelAugKind::head_drop: {
      const Matrix bits = sample_head_bits(cfg.encoder.num_layers,
                                           cfg.encoder.num_heads, tcfg.model_ratio,
                                           rng_aug);
      int dropped = 0;
      for (double b : bits.a) dropped += b == 0.0 ? 1 : 0;
      rep << "  attention heads dropped this pass: " << dropped << "/" << bits.size()
          << "\n";
      break;
    }
  }

  std::cout << rep.str();
  if (!o.out_dir.empty()) {
    fs::create_directories(fs::path(o.out_dir) / "reports");
    write_text_file(fs::path(o.out_dir) / "reports" / "augment_preview.txt",
                    rep.str());
    write_text_file(fs::path(o.out_dir) / "config.ini", render_config(cfg));
    append_manifest(o.out_dir, "augment-preview", {{"dataset", o.dataset_arg}},
                    {"config.ini", "reports/augment_preview.txt"});
  }
  return 0;
}

// -------------------------------------------------------------------- wiring

void add_config_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "INI config file");
  cmd->add_option("--set", o.sets,
                  "Override one config value (section.key=value); repeatable");
  cmd->add_option("--epochs", o.epochs, "Shorthand for --set train.epochs=N");
  cmd->add_option("--seed", o.seed, "Shorthand for --set train.seed=N");
  cmd->add_option("--batch-size", o.batch_size,
                  "Shorthand for --set train.batch_size=N");
  cmd->add_option("--lr", o.lr, "Shorthand for --set train.learning_rate=X");
  cmd->add_option("--mode", o.mode,
                  "Shorthand for --set train.mode=... (dual, data-only, "
                  "model-only, pairwise-all)");
  cmd->add_option("--data-aug", o.data_aug,
                  "Shorthand for setting both augment.data_a and augment.data_b");
  cmd->add_option("--model-aug", o.model_aug,
                  "Shorthand for --set train.model_aug=...");
  cmd->add_option("--ratio", o.ratio, "Shorthand for --set augment.ratio=X");
  cmd->add_option("--temperature", o.temperature,
                  "Shorthand for --set train.temperature=X");
}

void add_dataset_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--dataset", o.dataset_arg,
                  "MUTAG, PROTEINS, any TU-layout directory name, or "
                  "synthetic[:count[:seed]] (default synthetic = 500 graphs, "
                  "seed 7)");
  cmd->add_option("--data-root", o.data_root,
                  "Directory holding TU dataset folders (default: "
                  "$GRAPPLE_DATA_ROOT, then ./data)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph contrastive pretraining with data- and model-side views"};
  app.require_subcommand(1);

  CommonOpts pretrain_o, embed_o, probe_o, diagnose_o, gradcheck_o, preview_o;
  int gc_coords = 200;
  double gc_step = 1e-5;
  double gc_tolerance = 1e-4;

  CLI::App* c_pretrain =
      app.add_subcommand("pretrain", "Run contrastive pretraining; writes "
                                     "checkpoints/, logs/, config echo, manifest");
  add_config_flags(c_pretrain, pretrain_o);
  add_dataset_flags(c_pretrain, pretrain_o);
  c_pretrain->add_option("--out", pretrain_o.out_dir, "Run output directory")
      ->required();

  CLI::App* c_embed = app.add_subcommand(
      "embed", "Embed a dataset with a trained checkpoint; writes embeddings/");
  add_dataset_flags(c_embed, embed_o);
  c_embed->add_option("--run", embed_o.run_dir,
                      "Pretrain output directory (uses its latest checkpoint)");
  c_embed->add_option("--checkpoint", embed_o.checkpoint_path,
                      "Explicit checkpoint file (overrides --run's latest)");
  c_embed->add_option("--out", embed_o.out_dir,
                      "Output directory (default: the --run directory)");
  c_embed->add_option("--set", embed_o.sets,
                      "Override one checkpoint-config value; repeatable");
  c_embed->add_option("--config", embed_o.config_path)->group("");  // rejected

  CLI::App* c_probe = app.add_subcommand(
      "probe", "Embed with a checkpoint, then cross-validated linear probe; "
               "writes reports/probe.{txt,csv}");
  add_dataset_flags(c_probe, probe_o);
  c_probe->add_option("--run", probe_o.run_dir,
                      "Pretrain output directory (uses its latest checkpoint)");
  c_probe->add_option("--checkpoint", probe_o.checkpoint_path,
                      "Explicit checkpoint file (overrides --run's latest)");
  c_probe->add_option("--out", probe_o.out_dir,
                      "Output directory (default: the --run directory)");
  c_probe->add_option("--set", probe_o.sets,
                      "Override one checkpoint-config value (e.g. eval.folds); "
                      "repeatable");
  c_probe->add_option("--config", probe_o.config_path)->group("");  // rejected

  CLI::App* c_diagnose = app.add_subcommand(
      "diagnose", "Alignment/uniformity trajectory over a run's checkpoint "
                  "series; writes reports/trajectory.csv");
  add_dataset_flags(c_diagnose, diagnose_o);
  c_diagnose->add_option("--run", diagnose_o.run_dir, "Pretrain output directory")
      ->required();
  c_diagnose->add_option("--out", diagnose_o.out_dir,
                         "Output directory (default: the --run directory)");
  c_diagnose->add_option("--set", diagnose_o.sets,
                         "Override one checkpoint-config value; repeatable");
  c_diagnose->add_option("--config", diagnose_o.config_path)->group("");  // rejected

  CLI::App* c_gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of the configured training "
                   "objective on a small synthetic batch");
  add_config_flags(c_gradcheck, gradcheck_o);
  c_gradcheck->add_option("--out", gradcheck_o.out_dir,
                          "Optional output directory for reports/gradcheck.txt");
  c_gradcheck->add_option("--coords", gc_coords, "Coordinates to sample")
      ->check(CLI::PositiveNumber);
  c_gradcheck->add_option("--step", gc_step, "Central-difference step")
      ->check(CLI::PositiveNumber);
  c_gradcheck->add_option("--tolerance", gc_tolerance, "Max relative error allowed")
      ->check(CLI::PositiveNumber);

  CLI::App* c_preview = app.add_subcommand(
      "augment-preview", "Dump one batch before/after the configured "
                         "augmentations (mask and prune counts)");
  add_config_flags(c_preview, preview_o);
  add_dataset_flags(c_preview, preview_o);
  c_preview->add_option("--out", preview_o.out_dir,
                        "Optional output directory for reports/augment_preview.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // flag/usage mistakes are configuration errors
  }

  try {
    if (app.got_subcommand(c_pretrain)) return cmd_pretrain(pretrain_o);
    if (app.got_subcommand(c_embed)) return cmd_embed(embed_o);
    if (app.got_subcommand(c_probe)) return cmd_probe(probe_o);
    if (app.got_subcommand(c_diagnose)) return cmd_diagnose(diagnose_o);
    if (app.got_subcommand(c_gradcheck)) {
      return cmd_gradcheck(gradcheck_o, gc_coords, gc_step, gc_tolerance);
    }
    if (app.got_subcommand(c_preview)) return cmd_augment_preview(preview_o);
    std::cerr << "config error: no command given\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
