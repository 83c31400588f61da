#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace spikecode {

/// Number rendering shared by every CSV writer: 6 significant digits,
/// "inf"/"-inf"/"nan" for non-finite values.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace spikecode
