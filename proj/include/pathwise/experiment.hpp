#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pathwise {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A validated experiment configuration. `effective` carries the parsed
// config with every default filled in, and is echoed into the manifest so
// artifacts are self-describing.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware default
  nlohmann::json effective;
};

// Parses and validates config text (JSON). Throws ConfigError on any
// validation failure.
ExperimentConfig parse_experiment_config(const std::string& json_text);

struct RunOutcome {
  // 0 completed, 3 runtime failure, 4 scan precondition failed.
  int exit_code = 0;
  std::string message;
  std::vector<std::string> artifacts;
};

// Runs the experiment and writes its CSV artifacts plus manifest.json under
// out_dir. Reruns with an identical config produce byte-identical CSVs.
// The manifest is written even when the run fails after validation.
RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          std::optional<std::uint64_t> seed_override = {},
                          int thread_override = 0);

extern const char* kVersion;

}  // namespace pathwise
