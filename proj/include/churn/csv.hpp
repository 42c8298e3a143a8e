#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace churn::csv {

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Strict double parse of the whole field; throws InvalidInput on failure.
double parse_double(std::string_view field, std::string_view what);

/// Shortest round-trip representation.
std::string format_double(double value);

/// 16-hex-digit FNV-1a digest of a string, used for config fingerprints.
std::string fingerprint(std::string_view text);

}  // namespace churn::csv
