#pragma once

#include <json.hpp>

#include "ptdx/model.hpp"

namespace ptdx {

// JSON keys mirror the field names; enums serialize as their short names and
// the ratio as a three-element array. from_json starts from defaults, so
// partial objects are valid; unknown keys are rejected by name.
void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace ptdx
