#pragma once

#include <string>
#include <vector>

#include "psim/config.hpp"

namespace psim {

inline constexpr const char* kArtifactVersion = "1.0.0";

// Exit codes: 0 pass, 1 execution error (thrown), 2 statistical verdict fail.
struct RunResult {
  int exit_code = 0;
  nlohmann::json report;
  std::vector<std::string> files;  // artifact paths written under out_dir
};

// Subcommands: "run", "lln", "clt", "validate-model".
RunResult run_experiment(const ExperimentConfig& config, const std::string& subcommand);

}  // namespace psim
