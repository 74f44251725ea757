#pragma once

#include <string>

#include <json.hpp>

namespace mediaflow {

using Json = nlohmann::json;

// Byte-stable serialization: object keys sorted, no whitespace, integers
// verbatim, floating point values with exactly six decimals, UTF-8 strings.
std::string canonical_dump(const Json& value);

// Same as canonical_dump but with two-space indentation, for humans.
std::string canonical_dump_pretty(const Json& value);

}  // namespace mediaflow
