#pragma once

// Shared helpers for the columnar text formats. Doubles are written with 17
// significant digits so that reading them back is bit-exact.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>

#include "vtauv/errors.hpp"

namespace vtauv::textio {

inline void WriteDouble(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline double ParseDouble(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw Error(ErrorCode::kIo, "malformed number '" + token + "'");
  }
  return v;
}

}  // namespace vtauv::textio
