#pragma once

#include <string>
#include <vector>

#include "aerocue/flight_state.hpp"

namespace aerocue {

// Validates `value` against the JSON-schema subset the stage schemas use:
// type (string or list), enum, required, properties, additionalProperties
// (boolean), items, minItems, maxItems, minimum, maximum, minLength.
// Returns one message per violation, "<json pointer>: <problem>".
std::vector<std::string> schema_errors(const Json& schema, const Json& value);

inline bool schema_valid(const Json& schema, const Json& value) { return schema_errors(schema, value).empty(); }

}  // namespace aerocue
