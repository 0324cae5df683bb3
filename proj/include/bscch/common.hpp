#pragma once

#include <limits>

namespace bscch {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace bscch
