#pragma once

// JSON model files.
//
//   general: {"sigma_x": [[...]], "b": [[...]], "e": [[...]]}
//   aligned: {"sigma_x": [[...]], "sigma_wy": [[...]], "sigma_wz": [[...]]}
//
// Matrices are row-major nested arrays of numbers. A 1-D array is accepted
// as a single row, so "b": [1, 0.5] means a 1x2 matrix.

#include <string>
#include <variant>

#include "json.hpp"
#include "keyrate/model.hpp"

namespace keyrate {

using AnyModel = std::variant<GeneralModel, AlignedModel>;

/// Throws ParseError for malformed JSON or a wrong schema, and the model's
/// own validation errors otherwise.
AnyModel parse_model(const std::string& text);
AnyModel load_model(const std::string& path);

nlohmann::json matrix_to_json(const Matrix& a);
/// `name` is used in diagnostics.
Matrix matrix_from_json(const nlohmann::json& j, const std::string& name);

/// Canonical form: sorted keys, shortest round-trip numbers, no whitespace.
std::string canonical_json(const GeneralModel& m);
std::string canonical_json(const AlignedModel& m);

/// Lowercase hex SHA-256 of canonical_json.
std::string model_digest(const GeneralModel& m);
std::string model_digest(const AlignedModel& m);

/// Fixed-format rendering used by every emitted file: 17 significant digits.
std::string format_double(double v);

}  // namespace keyrate
