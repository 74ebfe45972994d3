#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcheck/common.hpp"
#include "koopcheck/dictionaries.hpp"
#include "koopcheck/koopman_fit.hpp"

namespace koopcheck {

struct FittedModel;

constexpr int kModelSchemaVersion = 1;

// A fitted model as stored on disk. Matrices and eigenvector coefficients are
// kept as hex-floats so that a reload is bit-exact.
struct ModelArtifact {
  std::string fit_id;
  std::string system;  // registry name
  std::string method;  // edmd | generator
  std::string config_hash;
  Matrix matrix;       // K (edmd) or L (generator)
  double dt = 0.0;     // 0 for generator fits
  double gamma = 0.0;
  bool default_ridge = false;
  double residual = 0.0;
  double holdout_residual = 0.0;
  Box region;          // training region
  std::shared_ptr<const Dictionary> dictionary;
  std::vector<Eigenpair> pairs;

  [[nodiscard]] bool in_training_region(const Vector& x) const { return region.contains(x); }
};

ModelArtifact make_artifact(const FittedModel& fit, const std::string& system_name,
                            const std::string& config_hash);

nlohmann::json model_to_json(const ModelArtifact& model);
// Throws ConfigError on a malformed document.
ModelArtifact model_from_json(const nlohmann::json& j);

// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

void save_model(const std::string& path, const ModelArtifact& model);
ModelArtifact load_model(const std::string& path);

}  // namespace koopcheck
