#pragma once

#include <string>

#include <json.hpp>

namespace qfedtd {

/// Parses the TOML subset used by experiment files into a JSON object:
/// `key = value` pairs, `[table]` and `[table.sub]` headers, `[[array]]`
/// tables, `#` comments, and values that are basic strings, integers,
/// floats, booleans, or (possibly multi-line) arrays of those.
/// Throws ConfigError with the offending line number.
nlohmann::json parse_toml(const std::string& text);

/// read_file + parse_toml; a missing file is a ConfigError.
nlohmann::json load_toml(const std::string& path);

}  // namespace qfedtd
