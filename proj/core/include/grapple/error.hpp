#pragma once

#include <stdexcept>
#include <string>

namespace grapple {

// Single error type for the whole library. Everything that violates a
// contract (bad shapes, malformed files, domain violations) throws Error
// with a message specific enough to act on; nothing ever returns NaN/Inf
// silently.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

// Configuration mistakes (bad keys, out-of-range values, missing input
// artifacts) are split from runtime failures so the command line can map
// them to a distinct exit status.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

[[noreturn]] inline void fail_config(const std::string& msg) {
  throw ConfigError(msg);
}

inline void check_config(bool ok, const std::string& msg) {
  if (!ok) fail_config(msg);
}

}  // namespace grapple
