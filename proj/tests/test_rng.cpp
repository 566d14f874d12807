#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "grapple/rng.hpp"

using namespace grapple;

TEST_CASE("identical seed and stream give identical draws") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  CHECK(a.uniform01() == b.uniform01());
  CHECK(a.normal() == b.normal());
  CHECK(a.gumbel() == b.gumbel());
}

TEST_CASE("different stream ids decorrelate") {
  RngStream a(42, 1);
  RngStream b(42, 2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64() ? 1 : 0;
  CHECK(same == 0);
}

TEST_CASE("copying freezes the draw sequence") {
  RngStream a(9, 3);
  a.normal();
  const RngStream snapshot = a;
  std::vector<double> first, second;
  {
    RngStream r = snapshot;
    for (int i = 0; i < 10; ++i) first.push_back(r.uniform01());
  }
  {
    RngStream r = snapshot;
    for (int i = 0; i < 10; ++i) second.push_back(r.uniform01());
  }
  CHECK(first == second);
}

TEST_CASE("serialize round-trips the engine state exactly") {
  RngStream a(1234, 5);
  for (int i = 0; i < 17; ++i) a.next_u64();  // advance off the seed point
  const std::string state = a.serialize();
  RngStream b;
  b.deserialize(state);
  for (int i = 0; i < 50; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 stays strictly inside (0,1)") {
  RngStream rng(7, 1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform_int is in range and hits every value") {
  RngStream rng(8, 1);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t v = rng.uniform_int(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("bernoulli tracks its probability") {
  RngStream rng(9, 1);
  int hits = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  const double p_hat = static_cast<double>(hits) / n;
  CHECK(std::fabs(p_hat - 0.3) < 0.02);  // ~6 sigma for n=20000
  // Degenerate probabilities are exact.
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("normal draws have sane first moments") {
  RngStream rng(10, 1);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::fabs(sum / n) < 0.03);
  CHECK(std::fabs(sumsq / n - 1.0) < 0.05);
}

TEST_CASE("shuffle produces a permutation, deterministically per seed") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  std::vector<int> w = v;
  RngStream a(11, 2), b(11, 2);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);  // same stream, same permutation
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);  // astronomically unlikely to be identity
}
