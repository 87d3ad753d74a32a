#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace fastslow {

/// Round-trip decimal text for a double; "inf"/"-inf"/"nan" for non-finite values.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fastslow
