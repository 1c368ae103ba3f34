#pragma once

// JSON wire format for model specifications: a "variant" tag plus per-variant
// parameters; matrices are nested row-major arrays, function-valued fields
// are expression strings. The schema ships in docs/schema.json with one
// example per variant under docs/examples/.

#include <json.hpp>

#include "nlmarkov/models.hpp"

namespace nlmarkov {

ModelSpec model_spec_from_json(const nlohmann::json& doc);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

}  // namespace nlmarkov
