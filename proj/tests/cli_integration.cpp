#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

// End-to-end checks of the command-line binary. GRAPPLE_CLI_PATH is the
// built executable, injected by the build.

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::path("cli_itest") / "io";
  fs::create_directories(dir);
  const fs::path out_file = dir / ("out_" + std::to_string(counter) + ".txt");
  const fs::path err_file = dir / ("err_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(GRAPPLE_CLI_PATH) + " " + args + " >" +
                          out_file.string() + " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

const std::string kRunDir = "cli_itest/run";
const std::string kSmallNet =
    "--set encoder.hidden_dim=16 --set encoder.num_heads=2";

}  // namespace

TEST_CASE("running without a command fails as a usage error") {
  const RunResult r = run_cli("");
  CHECK(r.exit_code == 2);
}

TEST_CASE("an unknown flag fails as a usage error") {
  const RunResult r = run_cli("pretrain --frobnicate");
  CHECK(r.exit_code == 2);
}

TEST_CASE("pipeline: pretrain, embed, probe, diagnose on one run directory") {
  fs::remove_all(kRunDir);

  // --- pretrain ---------------------------------------------------------
  const RunResult pre = run_cli(
      "pretrain --dataset synthetic:12:3 --out " + kRunDir +
      " --epochs 2 --batch-size 8 --set train.checkpoint_every=1 --seed 3 " +
      kSmallNet);
  INFO("stderr: ", pre.err);
  REQUIRE(pre.exit_code == 0);
  CHECK(contains(pre.out, "pretrain: wrote"));
  CHECK(fs::exists(fs::path(kRunDir) / "config.ini"));
  CHECK(fs::exists(fs::path(kRunDir) / "checkpoints" / "epoch_0000.ckpt"));
  CHECK(fs::exists(fs::path(kRunDir) / "checkpoints" / "epoch_0002.ckpt"));
  CHECK(fs::exists(fs::path(kRunDir) / "logs" / "metrics.csv"));
  CHECK(fs::exists(fs::path(kRunDir) / "logs" / "plan.csv"));
  CHECK(fs::exists(fs::path(kRunDir) / "manifest.txt"));

  // The effective config echoes both the flag overrides and the defaults.
  const std::string echoed = slurp(fs::path(kRunDir) / "config.ini");
  CHECK(contains(echoed, "epochs = 2"));
  CHECK(contains(echoed, "hidden_dim = 16"));
  CHECK(contains(echoed, "temperature = 0.2"));
  CHECK(contains(echoed, "ratio = 0.2"));
  CHECK(contains(echoed, "pe_dim = 8"));
  CHECK(lines_of(slurp(fs::path(kRunDir) / "logs" / "metrics.csv")).size() == 2);

  // --- embed ------------------------------------------------------------
  const RunResult emb = run_cli("embed --run " + kRunDir +
                                " --dataset synthetic:12:3");
  INFO("stderr: ", emb.err);
  REQUIRE(emb.exit_code == 0);
  const fs::path table_path =
      fs::path(kRunDir) / "embeddings" / "synthetic_epoch_0002.csv";
  REQUIRE(fs::exists(table_path));
  const std::vector<std::string> table_lines = lines_of(slurp(table_path));
  REQUIRE(!table_lines.empty());
  CHECK(table_lines[0] == "dim=16 count=12 classes=2");
  CHECK(table_lines.size() == 13);  // header + one row per graph

  // --- probe ------------------------------------------------------------
  const RunResult prb = run_cli("probe --run " + kRunDir +
                                " --dataset synthetic:12:3 --set eval.folds=3 "
                                "--set eval.seeds=2");
  INFO("stderr: ", prb.err);
  REQUIRE(prb.exit_code == 0);
  CHECK(contains(prb.out, "probe: accuracy"));
  const std::string report = slurp(fs::path(kRunDir) / "reports" / "probe.txt");
  CHECK(contains(report, "accuracy_mean = "));
  CHECK(contains(report, "accuracy_std = "));
  CHECK(contains(report, "folds = 3"));
  const std::vector<std::string> csv =
      lines_of(slurp(fs::path(kRunDir) / "reports" / "probe.csv"));
  CHECK(csv.size() == 6);  // 2 seeds x 3 folds

  // --- diagnose ---------------------------------------------------------
  const RunResult diag =
      run_cli("diagnose --run " + kRunDir + " --dataset synthetic:12:3");
  INFO("stderr: ", diag.err);
  REQUIRE(diag.exit_code == 0);
  const std::vector<std::string> traj =
      lines_of(slurp(fs::path(kRunDir) / "reports" / "trajectory.csv"));
  REQUIRE(traj.size() == 3);  // checkpoints at epochs 0, 1, 2
  for (const std::string& line : traj)
    CHECK(std::count(line.begin(), line.end(), ',') == 2);

  // --- manifest accumulates one block per command ------------------------
  const std::string manifest = slurp(fs::path(kRunDir) / "manifest.txt");
  CHECK(contains(manifest, "[pretrain]"));
  CHECK(contains(manifest, "[embed]"));
  CHECK(contains(manifest, "[probe]"));
  CHECK(contains(manifest, "[diagnose]"));
}

TEST_CASE("probe without a checkpoint names the missing file") {
  const RunResult r = run_cli(
      "probe --checkpoint cli_itest/nowhere/missing.ckpt --dataset "
      "synthetic:8:1 --out cli_itest/probe_missing");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "checkpoint not found"));
  CHECK(contains(r.err, "missing.ckpt"));
}

TEST_CASE("a rejected config value names the key and line") {
  fs::create_directories("cli_itest");
  std::ofstream("cli_itest/bad.ini") << "[augment]\nratio = 1.5\n";
  const RunResult r = run_cli(
      "pretrain --config cli_itest/bad.ini --dataset synthetic:8:1 --out "
      "cli_itest/bad_run");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "[augment].ratio"));
  CHECK(contains(r.err, "bad.ini:2"));
}

TEST_CASE("an unknown override key is a configuration error") {
  const RunResult r = run_cli(
      "pretrain --dataset synthetic:8:1 --out cli_itest/typo_run --set "
      "train.epcohs=3");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "epcohs"));
}

TEST_CASE("a missing dataset directory is a configuration error") {
  const RunResult r = run_cli(
      "pretrain --dataset MUTAG --data-root cli_itest/no_data --out "
      "cli_itest/no_data_run --epochs 0");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "dataset directory not found"));
}

TEST_CASE("an empty config file falls back to the documented defaults") {
  fs::create_directories("cli_itest");
  std::ofstream("cli_itest/empty.ini") << "";
  const std::string dir = "cli_itest/defaults_run";
  fs::remove_all(dir);
  const RunResult r = run_cli("pretrain --config cli_itest/empty.ini --dataset "
                              "synthetic:8:1 --out " +
                              dir + " --epochs 0");
  INFO("stderr: ", r.err);
  REQUIRE(r.exit_code == 0);
  const std::string echoed = slurp(fs::path(dir) / "config.ini");
  CHECK(contains(echoed, "hidden_dim = 64"));
  CHECK(contains(echoed, "temperature = 0.2"));
  CHECK(contains(echoed, "pe_dim = 8"));
  CHECK(contains(echoed, "ratio = 0.2"));
  CHECK(contains(echoed, "epochs = 0"));  // the flag override is echoed too
}

TEST_CASE("gradient checking the full objective passes from the CLI") {
  const RunResult r = run_cli("gradcheck " + kSmallNet + " --coords 40");
  INFO("stdout: ", r.out);
  INFO("stderr: ", r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "gradcheck: PASS"));
  CHECK(contains(r.out, "max relative error"));
}

TEST_CASE("augmentation preview reports the realized masks") {
  const RunResult r = run_cli(
      "augment-preview --dataset synthetic:6:4 --data-aug "
      "selective_node_mask --out cli_itest/preview");
  INFO("stderr: ", r.err);
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "nodes masked"));
  CHECK(fs::exists(fs::path("cli_itest/preview") / "reports" /
                   "augment_preview.txt"));
}

TEST_CASE("embed rejects --config in favor of the checkpoint's text") {
  const RunResult r = run_cli("embed --run " + kRunDir +
                              " --dataset synthetic:12:3 --config "
                              "cli_itest/empty.ini");
  CHECK(r.exit_code == 2);
}
