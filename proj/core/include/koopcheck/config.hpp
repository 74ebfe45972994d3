#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcheck/common.hpp"
#include "koopcheck/control.hpp"

namespace koopcheck {

constexpr int kConfigSchemaVersion = 1;

struct SystemBlock {
  std::string id;
  std::string name;
  std::map<std::string, double> parameters;
  Box region;
  // Newton seeds per axis for the fixed-point search (0: 41 in 1-D, 9 otherwise).
  int fixed_point_seeds = 0;
};

struct IndicatorBlock {
  std::string system;
  std::vector<int> resolution;
  double horizon = kDefaultBasinHorizon;
  double capture_radius = kDefaultCaptureRadius;
};

struct DictionaryBlock {
  std::string id;
  std::string kind;  // monomial | rbf
  std::size_t dimension = 0;
  int max_degree = 0;
  bool include_constant = true;
  std::size_t centers = 0;
  double shape = 1.0;
  Box region;  // rbf centers are drawn from here
  std::optional<IndicatorBlock> indicators;
};

struct FitBlock {
  std::string id;
  std::string system;
  std::string dictionary;
  std::string method = "edmd";  // edmd | generator
  double dt = 0.1;
  std::optional<double> gamma;
  std::size_t samples = 2000;
  std::size_t holdout = 500;
};

struct Lemma1Block {
  std::vector<std::string> oracle_systems;
  std::vector<std::string> fits;
  double tol_lambda = 1e-3;
  double tol_phi_oracle = 1e-10;
  double tol_phi_fitted = 5e-2;
};

struct Theorem2Block {
  std::string system;
  std::vector<double> radii;
  double threshold = 20.0;
};

struct Theorem3Block {
  std::string system;
  Box region;
  std::size_t starts = 200;
  double tol = 0.01;
  int dense_resolution = 1001;
};

struct Theorem4Block {
  std::string system;
  double level = 1.0;
  Box start_region;
  std::size_t starts = 200;
  double horizon = 5.0;
  double drift_tol = 1e-6;
  double sample_dt = 0.01;
};

struct ExitCase {
  std::string oracle;  // expression id
  Box region;
};

struct ExitBlock {
  std::string system;
  std::vector<ExitCase> cases;
  std::size_t starts = 100;
  double horizon = 20.0;
  int dense_resolution = 1001;
};

struct BasinBlock {
  std::vector<std::string> fits;
  double separation_tol = 0.05;
};

struct Corollary5Block {
  std::string oracle_system;
  Box oracle_region;
  int oracle_region_resolution = 101;
  double oracle_tol = 1e-10;
  std::string fit;
  double offset = 1e-4;
  double horizon = 20.0;
  std::size_t samples_per_branch = 200;
  double fitted_tol = 0.1;
  double bound_cap = 1e3;
};

struct ClosedOrbitCase {
  std::string fit;
  double tol_re = 1e-6;
  double tol_phi = 0.05;
};

struct Theorem8Block {
  std::vector<ClosedOrbitCase> cases;
  std::vector<Vector> orbit_starts;
  double horizon = 20.0;
  std::size_t samples_per_orbit = 400;
};

struct ChecksBlock {
  std::optional<Lemma1Block> lemma1;
  std::optional<Theorem2Block> theorem2;
  std::optional<Theorem3Block> theorem3;
  std::optional<Theorem4Block> theorem4;
  std::optional<ExitBlock> exit_theorem;
  std::optional<BasinBlock> lemma6_theorem7;
  std::optional<Corollary5Block> corollary5;
  std::optional<Theorem8Block> theorem8;
};

struct ControlScenarioBlock {
  std::string id;
  Vector x0;
  InputSchedule schedule;
};

struct ControlBlock {
  std::string system;          // controlled system block id
  std::string label_system;    // uncontrolled counterpart used for fixed points
  std::string state_dictionary;
  int control_state_degree = 4;
  int control_input_degree = 1;
  Box input_box;
  std::size_t samples = 4000;
  double zero_input_fraction = 0.5;
  std::optional<double> gamma;
  double null_threshold = kDefaultNullThreshold;
  std::size_t bound_samples = 10000;
  double horizon = 3.0;
  std::vector<ControlScenarioBlock> scenarios;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  double integrator_tolerance = 1e-10;
  std::vector<SystemBlock> systems;
  std::vector<DictionaryBlock> dictionaries;
  std::vector<FitBlock> fits;
  ChecksBlock checks;
  std::optional<ControlBlock> control;
  nlohmann::json source;  // validated document, seed override applied

  // Structural validation only: unknown keys, wrong types and bad values throw
  // ConfigError. Cross references are resolved when used.
  static ExperimentConfig parse(const nlohmann::json& document);
  static ExperimentConfig load(const std::string& path);

  void override_seed(std::uint64_t seed);
  // FNV-1a of the canonical (sorted-key) JSON of `source`.
  [[nodiscard]] std::string hash() const;

  // Throw ConfigError for unknown ids.
  [[nodiscard]] const SystemBlock& system(const std::string& id) const;
  [[nodiscard]] const DictionaryBlock& dictionary(const std::string& id) const;
  [[nodiscard]] const FitBlock& fit(const std::string& id) const;
};

}  // namespace koopcheck
