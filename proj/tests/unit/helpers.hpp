#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "koopcheck/common.hpp"

namespace testing {

inline koopcheck::Vector vec(std::initializer_list<double> v) {
  koopcheck::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline koopcheck::Box box1(double lo, double hi) { return {vec({lo}), vec({hi})}; }
inline koopcheck::Box box2(double lo, double hi) { return {vec({lo, lo}), vec({hi, hi})}; }

// Bistable x' = x - x^3 solved in closed form.
inline double bistable_solution(double x0, double t) {
  const double e = std::exp(2.0 * t);
  return x0 * std::exp(t) / std::sqrt(1.0 - x0 * x0 + x0 * x0 * e);
}

inline std::string source_path(const std::string& rel) { return std::string(KOOPCHECK_SOURCE_DIR) + "/" + rel; }

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("koopcheck_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// A small but complete config on the bistable system, quick enough for the
// CLI and suite tests.
inline nlohmann::json small_config() {
  return nlohmann::json::parse(R"({
    "schema_version": 1,
    "seed": 7,
    "systems": [
      {"id": "bistable", "name": "bistable", "region": {"lower": [-2], "upper": [2]}},
      {"id": "controlled", "name": "controlled_bistable", "region": {"lower": [-2], "upper": [2]}}
    ],
    "dictionaries": [
      {"id": "mono", "kind": "monomial", "dimension": 1, "max_degree": 5,
       "indicators": {"system": "bistable", "resolution": [101]}}
    ],
    "fits": [
      {"id": "fit", "system": "bistable", "dictionary": "mono", "dt": 0.1, "samples": 400, "holdout": 100}
    ],
    "checks": {
      "lemma1": {"oracle_systems": ["bistable"], "fits": []},
      "theorem2": {"system": "bistable", "radii": [0.1, 0.01, 0.001], "threshold": 20},
      "theorem3": {"system": "bistable", "region": {"lower": [0.1], "upper": [0.9]}, "starts": 20},
      "exit_theorem": {"system": "bistable", "starts": 10, "horizon": 20,
                       "cases": [{"oracle": "(1-x^2)/x^2", "region": {"lower": [0.5], "upper": [0.9]}}]}
    },
    "control": {
      "system": "controlled", "label_system": "bistable", "state_dictionary": "mono",
      "input_box": {"lower": [-2], "upper": [2]}, "samples": 1000, "bound_samples": 1000, "horizon": 3,
      "scenarios": [
        {"id": "crossing", "x0": [-0.5], "schedule": {"kind": "constant", "value": [1.5]}},
        {"id": "unforced", "x0": [-0.5], "schedule": {"kind": "constant", "value": [0.0]}}
      ]
    }
  })");
}

inline std::string write_config(const std::filesystem::path& dir, const nlohmann::json& config) {
  const auto path = dir / "config.json";
  std::ofstream(path) << config.dump(2);
  return path.string();
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
