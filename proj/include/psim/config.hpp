#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psim/limit_solver.hpp"
#include "psim/model.hpp"
#include "psim/test_function.hpp"

namespace psim {

// Carries every violation found in a config file, not just the first.
class ConfigListError : public ConfigError {
 public:
  explicit ConfigListError(std::vector<std::string> messages)
      : ConfigError(join(messages)), messages_(std::move(messages)) {}
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& ms) {
    std::string out = "config validation failed:";
    for (const auto& m : ms) out += "\n  - " + m;
    return out;
  }
  std::vector<std::string> messages_;
};

// One self-describing experiment: model + initial condition + run + analysis
// + output. Schema version 1 (see configs/schema.json).
struct ExperimentConfig {
  int version = 1;

  std::string model_name;
  nlohmann::json model_params;

  std::string initial_kind;  // "product" | "product_gaussian" | "explicit"
  std::vector<std::pair<std::string, double>> initial_distribution;
  double initial_mean = 0;
  double initial_sd = 1;
  std::vector<std::string> initial_types;

  double T = 0;
  std::vector<std::int64_t> n_list;
  int replicas = 1;
  std::uint64_t seed = 0;
  double dt_limit = 1e-3;
  int sample_points = 50;

  bool has_grid = false;
  double grid_lo = 0, grid_hi = 0;
  int grid_n = 0;
  double grid_dt = 1e-2;
  double leakage_bound = 1e-3;
  bool grid_fft = false;

  std::string metric = "tv";
  nlohmann::json test_functions;  // declarative array, resolved against the space
  nlohmann::json tolerances;

  std::string out_dir = "out";
  std::vector<std::string> formats = {"csv", "json"};

  nlohmann::json raw;  // canonical parsed document, for hashing and manifests
};

// Parses and validates; throws ConfigListError carrying all violations.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const nlohmann::json& doc);

// Either a finite-space model or the real-line percolation model.
struct BuiltModel {
  std::optional<FiniteModel> finite;
  std::optional<PercolationModel> percolation;

  const TypeSpace& space() const {
    return finite ? finite->space : percolation->space;
  }
};

BuiltModel build_model(const ExperimentConfig& config);

// Initial probability vector over a finite space (product initials).
Eigen::VectorXd initial_distribution_vector(const ExperimentConfig& config, const TypeSpace& space);

// Explicit initial configuration as label indices.
std::vector<int> initial_explicit_labels(const ExperimentConfig& config, const TypeSpace& space);

// Declarative test functions resolved against the model's space.
TestFamily build_test_family(const ExperimentConfig& config, const TypeSpace& space);

DensityGrid build_density_grid(const ExperimentConfig& config);

std::uint64_t fnv1a64(const void* data, std::size_t bytes);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace psim
