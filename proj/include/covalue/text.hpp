#pragma once

#include <string>
#include <string_view>

namespace covalue {

// Shortest decimal form that parses back to the identical double
// (std::to_chars round-trip guarantee).  "inf"/"-inf"/"nan" for
// non-finite values.
std::string format_double(double value);

// Locale-independent parse; accepts the format_double spellings.
// Returns false on anything else, including trailing junk.
bool parse_double(std::string_view text, double& out);

}  // namespace covalue
