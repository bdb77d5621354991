#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace revhalf::csv {

/// Fixed-precision field so reruns produce identical bytes.
inline std::string num(double v, int precision = 6) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string sci(double v) {
  if (!std::isfinite(v)) return num(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

}  // namespace revhalf::csv
