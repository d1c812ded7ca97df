#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "helixsim/types.hpp"

namespace helixsim {

// Configuration-file problem: missing file, malformed JSON, schema violation.
// Distinct from validation errors (std::invalid_argument) so the CLI can map
// them to different exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Built-in presets. The same specs ship as JSON files under presets/; a test
// guards against drift between the two.
ModelSpec llama405b_like();
ModelSpec deepseek_r1_like();
HardwareSpec gb200_like();

std::vector<std::string> model_preset_names();
std::vector<std::string> hardware_preset_names();

// JSON schema (documented in the README): flat objects with snake_case keys,
// an optional nested "moe" object on models. Unknown keys are rejected with a
// message naming the key; missing or mistyped fields name the field.
nlohmann::json to_json(const ModelSpec& model);
nlohmann::json to_json(const HardwareSpec& hw);
nlohmann::json to_json(const WorkloadSpec& work);
ModelSpec model_from_json(const nlohmann::json& j);
HardwareSpec hardware_from_json(const nlohmann::json& j);
WorkloadSpec workload_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParallelismConfig& cfg);
ParallelismConfig parallelism_from_json(const nlohmann::json& j);

// Resolve a --model/--hardware argument: preset name if it matches one,
// otherwise a path to a JSON file. The result is validated before returning.
ModelSpec load_model(const std::string& name_or_path);
HardwareSpec load_hardware(const std::string& name_or_path);
WorkloadSpec load_workload(const std::string& path);
ParallelismConfig load_parallelism(const std::string& path);

}  // namespace helixsim
