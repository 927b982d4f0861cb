#pragma once

#include <string>

namespace gucci {

/// Shortest round-trip decimal form; locale-independent ('.' separator).
/// Non-finite values print as "nan", "inf", "-inf".
std::string format_double(double v);

}  // namespace gucci
