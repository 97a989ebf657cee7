#include "maple/format.hpp"

#include <cstdio>

namespace maple {

std::string format_real(double x) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace maple
