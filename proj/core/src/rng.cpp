#include "grapple/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "grapple/error.hpp"

namespace grapple {

namespace {

// splitmix64: decorrelates (seed, stream_id) pairs into engine seeds.
uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id) {
  uint64_t x = seed ^ (0xd1b54a32d192ed03ULL * (stream_id + 1));
  uint64_t s0 = splitmix64(x);
  uint64_t s1 = splitmix64(x);
  engine_.seed(s0 ^ (s1 << 1));
}

uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform01() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  double u1 = uniform01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gumbel() { return -std::log(-std::log(uniform01())); }

bool RngStream::bernoulli(double p_true) {
  check(p_true >= 0.0 && p_true <= 1.0,
        "bernoulli: probability " + std::to_string(p_true) + " outside [0,1]");
  return uniform01() < p_true;
}

uint64_t RngStream::uniform_int(uint64_t n) {
  check(n > 0, "uniform_int: empty range");
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::deserialize(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  check(!is.fail(), "RngStream: malformed serialized engine state");
}

}  // namespace grapple
