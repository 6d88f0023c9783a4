#pragma once

#include "json.hpp"

#include <string_view>

namespace flexctl {

/// Reads the TOML subset used by run configurations into a JSON tree:
/// [tables] and [dotted.tables], bare/quoted/dotted keys, strings, integers,
/// floats, booleans, arrays (multi-line allowed) and inline tables.
/// Dates and arrays of tables are not supported.
/// Throws ConfigError("line N: ...") on malformed input or duplicate keys.
nlohmann::json parse_toml(std::string_view text);

}  // namespace flexctl
