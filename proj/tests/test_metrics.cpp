#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "grapple/checkpoint.hpp"
#include "grapple/embed_io.hpp"
#include "grapple/error.hpp"
#include "grapple/graph.hpp"
#include "grapple/metrics.hpp"
#include "grapple/rng.hpp"
#include "grapple/synthetic.hpp"
#include "grapple/trainer.hpp"

using namespace grapple;
namespace fs = std::filesystem;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (double& v : m.a) v = rng.normal();
  return m;
}

// Double-loop oracles on explicitly normalized rows.
double oracle_alignment(const Matrix& a, const Matrix& b, double alpha) {
  const Matrix na = normalize_rows(a);
  const Matrix nb = normalize_rows(b);
  double total = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double sq = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      const double d = na.at(i, j) - nb.at(i, j);
      sq += d * d;
    }
    total += std::pow(std::sqrt(sq), alpha);
  }
  return total / a.rows;
}

double oracle_uniformity(const Matrix& v, double beta) {
  const Matrix nv = normalize_rows(v);
  double total = 0.0;
  long long pairs = 0;
  for (int i = 0; i < v.rows; ++i) {
    for (int j = 0; j < v.rows; ++j) {
      if (i == j) continue;
      double sq = 0.0;
      for (int c = 0; c < v.cols; ++c) {
        const double d = nv.at(i, c) - nv.at(j, c);
        sq += d * d;
      }
      total += std::exp(-beta * std::pow(std::sqrt(sq), beta));
      ++pairs;
    }
  }
  return std::log(total / static_cast<double>(pairs));
}

Dataset synthetic_dataset(int n, uint64_t seed) {
  Dataset ds;
  ds.name = "synthetic";
  ds.graphs = generate_synthetic_dataset(n, SyntheticSpec{}, seed);
  ds.num_classes = 2;
  ds.feature_dim = 1;
  return ds;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("metrics_test") / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.is_open());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("row normalization rejects zero rows and preserves direction") {
  Matrix m(2, 3);
  m.at(0, 0) = 3.0;
  m.at(0, 1) = 4.0;
  m.at(1, 2) = -2.0;
  const Matrix n = normalize_rows(m);
  CHECK(n.at(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n.at(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(n.at(1, 2) == doctest::Approx(-1.0).epsilon(1e-15));

  Matrix with_zero(2, 3);
  with_zero.at(0, 0) = 1.0;  // row 1 stays all-zero
  CHECK_THROWS_AS(normalize_rows(with_zero), Error);
}

TEST_CASE("alignment matches the double-loop oracle") {
  RngStream rng(51, 60);
  for (double alpha : {2.0, 3.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 3 + static_cast<int>(rng.uniform_int(6));
      const int d = 2 + static_cast<int>(rng.uniform_int(8));
      const Matrix a = random_matrix(n, d, rng);
      const Matrix b = random_matrix(n, d, rng);
      CHECK(std::fabs(alignment(a, b, alpha) - oracle_alignment(a, b, alpha)) <=
            1e-12);
    }
  }
  // Identical views align perfectly.
  const Matrix a = random_matrix(4, 5, rng);
  CHECK(alignment(a, a) == 0.0);
}

TEST_CASE("uniformity matches the double-loop oracle") {
  RngStream rng(52, 60);
  for (double beta : {2.0, 3.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 3 + static_cast<int>(rng.uniform_int(6));
      const int d = 2 + static_cast<int>(rng.uniform_int(8));
      const Matrix v = random_matrix(n, d, rng);
      CHECK(std::fabs(uniformity(v, beta) - oracle_uniformity(v, beta)) <= 1e-12);
    }
  }
  // A fully collapsed stack has uniformity log(1) = 0, the worst value.
  Matrix collapsed(4, 3);
  for (int i = 0; i < 4; ++i) collapsed.at(i, 0) = 2.0;
  CHECK(uniformity(collapsed) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("metric preconditions") {
  RngStream rng(53, 60);
  const Matrix a = random_matrix(4, 5, rng);
  const Matrix b = random_matrix(3, 5, rng);
  CHECK_THROWS_AS(alignment(a, b), Error);          // row mismatch
  CHECK_THROWS_AS(uniformity(random_matrix(1, 5, rng)), Error);  // no pairs
}

TEST_CASE("embedding a dataset is deterministic and labeled correctly") {
  const Dataset ds = synthetic_dataset(10, 13);
  EncoderConfig ecfg;
  ecfg.num_layers = 1;
  ecfg.num_heads = 2;
  ecfg.hidden_dim = 16;
  ecfg.pe_dim = 4;
  ecfg.input_dim = 1;
  ParamStore params;
  RngStream rng(13, 11);
  add_encoder_params(params, ecfg, rng);
  add_projection_params(params, ecfg, rng);
  add_scorer_params(params, ecfg, rng);

  const EmbeddingTable t1 = embed_dataset(ds, params, ecfg);
  CHECK(t1.rows.rows == 10);
  CHECK(t1.rows.cols == ecfg.hidden_dim);
  CHECK(t1.num_classes == 2);
  REQUIRE(t1.labels.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(t1.labels[i] == ds.graphs[i].label);

  const EmbeddingTable t2 = embed_dataset(ds, params, ecfg);
  CHECK(max_abs_diff(t1.rows, t2.rows) == 0.0);

  // A prefix subset embeds to the same rows: the readout is per-graph.
  Dataset prefix = ds;
  prefix.graphs.resize(4);
  const EmbeddingTable tp = embed_dataset(prefix, params, ecfg);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < t1.rows.cols; ++j)
      CHECK(tp.rows.at(i, j) ==
            doctest::Approx(t1.rows.at(i, j)).epsilon(1e-10));
}

TEST_CASE("embedding tables round-trip through their text format") {
  TempDir dir("table_io");
  RngStream rng(54, 60);
  EmbeddingTable table;
  table.rows = random_matrix(6, 5, rng);
  table.labels = {0, 1, 1, 0, 2, 1};
  table.num_classes = 3;
  const std::string path = (dir.path / "emb.csv").string();
  write_embedding_table(path, table);

  const EmbeddingTable back = read_embedding_table(path);
  CHECK(back.num_classes == 3);
  CHECK(back.labels == table.labels);
  CHECK(max_abs_diff(back.rows, table.rows) == 0.0);

  // write -> read -> write is byte-stable.
  const std::string path2 = (dir.path / "emb2.csv").string();
  write_embedding_table(path2, back);
  CHECK(read_file(path) == read_file(path2));

  const std::string header = read_file(path).substr(0, read_file(path).find('\n'));
  CHECK(header == "dim=5 count=6 classes=3");
}

TEST_CASE("embedding table reader rejects damaged files") {
  TempDir dir("table_damage");
  RngStream rng(55, 60);
  EmbeddingTable table;
  table.rows = random_matrix(3, 4, rng);
  table.labels = {0, 1, 0};
  table.num_classes = 2;
  const std::string good = (dir.path / "good.csv").string();
  write_embedding_table(good, table);
  const std::string content = read_file(good);

  CHECK_THROWS_AS(read_embedding_table((dir.path / "absent.csv").string()), Error);

  SUBCASE("corrupt header") {
    const std::string p = (dir.path / "header.csv").string();
    std::ofstream(p) << "dim=x count=3 classes=2\n";
    CHECK_THROWS_AS(read_embedding_table(p), Error);
  }
  SUBCASE("row count mismatch") {
    const std::string p = (dir.path / "short.csv").string();
    const size_t last = content.rfind('\n', content.size() - 2);
    std::ofstream(p) << content.substr(0, last + 1);
    CHECK_THROWS_AS(read_embedding_table(p), Error);
  }
  SUBCASE("non-numeric value") {
    const std::string p = (dir.path / "value.csv").string();
    std::string damaged = content;
    damaged.replace(damaged.find("0,"), 2, "0,oops_");
    std::ofstream(p) << damaged;
    CHECK_THROWS_AS(read_embedding_table(p), Error);
  }
  SUBCASE("label outside the class range") {
    const std::string p = (dir.path / "label.csv").string();
    std::ofstream(p) << "dim=1 count=2 classes=2\n5,0.5\n1,0.25\n";
    CHECK_THROWS_AS(read_embedding_table(p), Error);
  }
}

TEST_CASE("trajectory under identity views reports zero alignment") {
  // With identity data views and an identity plan both branches see the
  // same input through the same weights, so every pair coincides.
  const Dataset ds = synthetic_dataset(6, 21);
  TrainConfig tcfg;
  tcfg.epochs = 0;
  tcfg.batch_size = 8;
  tcfg.data_a.kind = DataAugKind::identity;
  tcfg.data_b.kind = DataAugKind::identity;
  tcfg.model_kind = ModelAugKind::identity;
  tcfg.seed = 2;
  EncoderConfig ecfg;
  ecfg.num_layers = 1;
  ecfg.num_heads = 2;
  ecfg.hidden_dim = 16;
  ecfg.pe_dim = 4;
  ecfg.input_dim = 1;

  Checkpoint ckpt;
  RngStream rng(2, 11);
  add_encoder_params(ckpt.params, ecfg, rng);
  add_projection_params(ckpt.params, ecfg, rng);
  add_scorer_params(ckpt.params, ecfg, rng);

  std::vector<std::pair<int, Checkpoint>> series;
  series.emplace_back(0, ckpt);
  const std::vector<TrajectoryPoint> traj =
      alignment_uniformity_trajectory(ds, series, tcfg, ecfg, nullptr, tcfg.seed);
  REQUIRE(traj.size() == 1);
  CHECK(traj[0].epoch == 0);
  CHECK(traj[0].alignment == 0.0);
  CHECK(std::isfinite(traj[0].uniformity));
  CHECK(traj[0].uniformity <= 0.0);
}

TEST_CASE("trajectory holds the augmentation draws fixed across checkpoints") {
  const Dataset ds = synthetic_dataset(6, 22);
  TrainConfig tcfg;
  tcfg.epochs = 0;
  tcfg.batch_size = 8;
  tcfg.data_a.kind = DataAugKind::selective_node_mask;
  tcfg.data_b.kind = DataAugKind::pe_mask;
  tcfg.model_kind = ModelAugKind::layer_drop;
  tcfg.seed = 5;
  EncoderConfig ecfg;
  ecfg.num_layers = 1;
  ecfg.num_heads = 2;
  ecfg.hidden_dim = 16;
  ecfg.pe_dim = 4;
  ecfg.input_dim = 1;

  Checkpoint ckpt;
  RngStream rng(5, 11);
  add_encoder_params(ckpt.params, ecfg, rng);
  add_projection_params(ckpt.params, ecfg, rng);
  add_scorer_params(ckpt.params, ecfg, rng);

  // The same parameter state listed twice must measure identically: the
  // stream restarts per checkpoint, so the draws cannot drift.
  std::vector<std::pair<int, Checkpoint>> series;
  series.emplace_back(0, ckpt);
  series.emplace_back(10, ckpt);
  const std::vector<TrajectoryPoint> traj =
      alignment_uniformity_trajectory(ds, series, tcfg, ecfg, nullptr, tcfg.seed);
  REQUIRE(traj.size() == 2);
  CHECK(traj[0].alignment == traj[1].alignment);
  CHECK(traj[0].uniformity == traj[1].uniformity);
  CHECK(traj[0].alignment > 0.0);  // stochastic views actually separate
}
