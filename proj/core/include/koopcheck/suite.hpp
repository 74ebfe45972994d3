#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "koopcheck/config.hpp"
#include "koopcheck/control.hpp"
#include "koopcheck/koopman_fit.hpp"
#include "koopcheck/report.hpp"

namespace koopcheck {

// Registered suite checks, in report order.
const std::vector<std::string>& registered_checks();

struct FittedModel {
  std::string id;
  std::string method;
  std::optional<KoopmanModel> discrete;
  std::optional<GeneratorModel> generator;
  EigenDecomposition eigen;
  Box region;
  double holdout_residual = 0.0;
  std::vector<Vector> holdout_states;
  std::size_t dropped_pairs = 0;  // straddling pairs removed before fitting

  [[nodiscard]] const std::shared_ptr<const Dictionary>& dictionary() const;
  [[nodiscard]] double residual() const;
  [[nodiscard]] const std::vector<Vector>& training_states() const;
};

// Lazily built systems, fixed points, basin grids, dictionaries and fits for
// one config. Everything is derived from the master seed and the block ids.
class Workspace {
 public:
  explicit Workspace(const ExperimentConfig& config);

  [[nodiscard]] const ExperimentConfig& config() const { return config_; }

  const System& system(const std::string& id);
  const std::vector<FixedPoint>& fixed_points(const std::string& system_id);
  const BasinGrid& basin_grid(const std::string& system_id, const std::vector<int>& resolution,
                              double horizon, double capture_radius);
  std::shared_ptr<const Dictionary> dictionary(const std::string& id);
  const FittedModel& fit(const std::string& id);

 private:
  const ExperimentConfig& config_;
  std::map<std::string, System> systems_;
  std::map<std::string, std::vector<FixedPoint>> fixed_points_;
  std::map<std::tuple<std::string, std::vector<int>, double, double>, BasinGrid> grids_;
  std::map<std::string, std::shared_ptr<const Dictionary>> dictionaries_;
  std::map<std::string, FittedModel> fits_;
};

// One report per registered check (or only `only`), in registry order. Errors
// inside a check become an inconclusive report with the message as a note.
// Throws ConfigError for an unknown `only` id.
std::vector<TheoremReport> run_all_checks(const ExperimentConfig& config,
                                          const std::optional<std::string>& only = std::nullopt);
std::vector<TheoremReport> run_all_checks(Workspace& workspace,
                                          const std::optional<std::string>& only = std::nullopt);

struct ControlRun {
  KoopmanControlModel model;
  LiftedDecomposition decomposition;
  InputBoundEstimate input_bound;
  std::vector<ExperimentReport> reports;  // one per scenario
};

// Fits the lifted control model and runs every configured scenario.
// Throws ConfigError when the config has no control block.
ControlRun run_control(Workspace& workspace);

}  // namespace koopcheck
