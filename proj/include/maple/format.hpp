#pragma once

#include <string>

namespace maple {

/// Decimal text with 17 significant digits ("%.17g"); round-trips every double.
std::string format_real(double x);

}  // namespace maple
