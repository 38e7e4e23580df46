#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace delayid {

/// Shortest representation that parses back to the same double; locale-independent.
std::string format_double(double v);

/// Scientific notation with the given number of significant digits, e.g. 1.3e-04.
std::string format_scientific(double v, int significant = 2);

/// Locale-independent parse accepting nan/inf; throws ParameterError on junk.
double parse_double(std::string_view s);

/// Splits one CSV line on commas and trims surrounding blanks (no quoting).
std::vector<std::string> split_csv(std::string_view line);

std::string trim(std::string_view s);

}  // namespace delayid
