#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace grapple {

// Fixed 17 significant digits: always round-trips a float64, used by every
// numeric log so reruns stay bitwise comparable.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shortest decimal form that parses back to exactly the same float64; used
// where a human reads the number (config echoes), so 0.2 stays "0.2".
inline std::string fmt_shortest(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    const double back = std::strtod(buf, nullptr);
    if (std::memcmp(&back, &v, sizeof v) == 0) return buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace grapple
