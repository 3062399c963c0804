#pragma once

#include <limits>
#include <string>
#include <string_view>

namespace tdslab {

// Extended precision is needed for time: near a cap crossing the switching
// intervals of the escape signal shrink below the resolution of double.
using real = long double;

// Digits required for a lossless decimal round trip of `real`.
inline constexpr int kRealDigits = std::numeric_limits<real>::max_digits10;

std::string format_real(real value);
real parse_real(std::string_view text);

}  // namespace tdslab
