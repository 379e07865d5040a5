#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

#include "hybridsde/model.hpp"

namespace hsde {

/// Parses JSON text; syntax errors become ParseError citing `source:line:column`.
nlohmann::json parse_json_text(std::string_view text, std::string_view source);

/// Reads and parses a JSON file. Missing or unreadable files raise ParseError.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// Builds a model from its JSON representation:
///
///   { "states": p,
///     "mu":     [[c0, c1, ...], ...],          // p polynomials
///     "sigma":  [[c0, ...], ...],              // p polynomials
///     "lambda": [[[c0, ...], ...], ...],       // p x p polynomials
///     "a": 1.0, "u": 0.5, "i0": 2,             // i0 is 1-based
///     "q": 0.0,                                // optional, default 0
///     "gamma": 10.0,                           // optional
///     "lipschitz_K": 1.0 }                     // optional
///
/// Schema problems raise ParseError naming the offending field path (e.g.
/// `model.lambda[1][2]`); range problems raise ModelError.
HybridModel model_from_json(const nlohmann::json& j, std::string_view field = "model");

HybridModel load_model(const std::filesystem::path& path);

nlohmann::json model_to_json(const HybridModel& model);

}  // namespace hsde
