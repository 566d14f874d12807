#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace grapple {

// Deterministic random stream. Wraps std::mt19937_64 (the engine itself is
// fully specified by the standard) but derives all variates with explicit
// arithmetic instead of std:: distributions, whose outputs differ between
// standard libraries and would break bitwise-reproducible runs.
//
// Copyable on purpose: a copy freezes the draw sequence, which the gradient
// checker uses to re-run closures with identical randomness.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  // Distinct stream ids seeded from one run seed give decorrelated streams.
  RngStream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64();
  // Uniform on (0,1), never exactly 0 or 1: ((x >> 11) + 0.5) * 2^-53.
  double uniform01();
  // Standard normal via Box-Muller (cosine branch only; no cached spare so
  // the state is exactly the engine state).
  double normal();
  double gumbel();  // -log(-log(u)), standard Gumbel(0,1)
  bool bernoulli(double p_true);
  // Uniform integer in [0, n), rejection-sampled (no modulo bias).
  uint64_t uniform_int(uint64_t n);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates with our own index draws, so the permutation depends only
    // on the engine, not on std::shuffle's unspecified algorithm.
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Engine state as decimal text (std::mt19937_64 streaming is standardized
  // and round-trips exactly).
  std::string serialize() const;
  void deserialize(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

}  // namespace grapple
