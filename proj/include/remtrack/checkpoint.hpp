#pragma once

#include <string>

#include "json.hpp"
#include "remtrack/parameter_store.hpp"

namespace remtrack::ad {

inline constexpr int kCheckpointVersion = 1;

/// {"version": 1, "dims": {...}, "params": {name: {"shape": [...], "data": [...]}}}
nlohmann::json checkpoint_to_json(const ParameterStore& store, const nlohmann::json& dims);

/// Returns the "dims" object after checking the version field.
nlohmann::json checkpoint_dims(const nlohmann::json& doc);

/// Copies parameter values from `doc` into `store`. The document's dims must
/// equal `expected_dims`, and its parameter set must match the store exactly
/// in names and shapes; any violation throws std::invalid_argument.
void load_checkpoint(const nlohmann::json& doc, const nlohmann::json& expected_dims,
                     ParameterStore& store);

}  // namespace remtrack::ad
