#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mfgnum::cli {

using Json = nlohmann::ordered_json;

/// Invalid configuration; the message starts with the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kOk = 0, kError = 1, kDiverged = 2 };

struct ScenarioInfo {
  std::string name;
  std::string description;
};

/// Registry order is fixed.
std::vector<ScenarioInfo> list_scenarios();
std::string format_listing();

/// Flat key-value defaults of a scenario. Throws ConfigError for an unknown name.
Json default_config(const std::string& scenario);

/// `key=value`; the value is parsed with the type of the default. Unknown keys are rejected.
void apply_override(Json& config, const std::string& assignment);
/// Overrides from a flat JSON object, with the same rules.
void merge_config(Json& config, const Json& overrides);

struct RunOutcome {
  int exit_code = kOk;
  std::string status;  ///< converged, completed, diverged, not_converged, solver_failure, invalid_config, error
  std::string message;
  std::filesystem::path directory;
};

/// Validates the configuration, runs the scenario and writes its CSVs and manifest.json into out_root / scenario.
/// Never throws; failures are reported through the outcome.
RunOutcome run_scenario(const std::string& scenario, const Json& config, const std::filesystem::path& out_root);

}  // namespace mfgnum::cli
