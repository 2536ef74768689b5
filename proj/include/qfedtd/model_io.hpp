#pragma once

#include <filesystem>
#include <string>

#include "qfedtd/mrp.hpp"

namespace qfedtd {

/// Model document:
///   {"n":..., "m":..., "gamma":..., "P":[[...]], "R":[...], "Phi":[[...]]}
/// Numbers are written with 17 significant digits so a round trip is exact.
std::string model_to_json(const Model& model);

/// Parses and validates a model document. Throws ConfigError on malformed
/// JSON or missing fields, and the usual validation errors otherwise.
Model model_from_json(const std::string& text);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace qfedtd
