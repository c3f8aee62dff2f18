#pragma once

#include <optional>
#include <string>

namespace alc {

// Shortest round-trip decimal form, '.' separator, locale-independent.
// NaN and infinities print as "nan"/"inf"/"-inf".
std::string fmt_double(double v);

// "nan" for a missing value (metric not computable).
std::string fmt_opt(const std::optional<double>& v);

// Strict reader for the above; throws on malformed input.
double parse_double(const std::string& s);

}  // namespace alc
