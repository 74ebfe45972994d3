#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopcheck/dictionaries.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck {

// Control observables u^a * x^b with |a| >= 1, so every entry vanishes at u = 0.
class ControlDictionary {
 public:
  struct Entry {
    std::vector<int> input_exponents;  // total degree >= 1
    std::vector<int> state_exponents;
  };

  ControlDictionary(std::size_t state_dim, std::size_t input_dim, std::vector<Entry> entries);

  [[nodiscard]] std::size_t state_dimension() const { return state_dim_; }
  [[nodiscard]] std::size_t input_dimension() const { return input_dim_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

  [[nodiscard]] Vector eval(const Vector& x, const Vector& u) const;
  [[nodiscard]] nlohmann::json to_json() const;

 private:
  std::size_t state_dim_;
  std::size_t input_dim_;
  std::vector<Entry> entries_;
};

// {u^a x^b : 1 <= |a| <= input_degree, |b| <= state_degree}, inputs outermost.
ControlDictionary build_control_dictionary(std::size_t state_dim, std::size_t input_dim,
                                           int state_degree, int input_degree = 1);

struct ControlSample {
  Vector x;
  Vector u;
};

// n samples, x uniform in `state_box`; a `zero_fraction` share has u = 0 and
// the rest draws u uniform in `input_box`.
std::vector<ControlSample> sample_control_data(const Box& state_box, const Box& input_box,
                                               std::size_t n, double zero_fraction,
                                               std::uint64_t seed);

// psi_x' = L_x psi_x + L_xu psi_xu.
struct KoopmanControlModel {
  Matrix Lx;
  Matrix Lxu;
  std::shared_ptr<const Dictionary> state_dictionary;
  std::shared_ptr<const ControlDictionary> control_dictionary;
  double gamma = 0.0;
  bool default_ridge = false;
  double residual = 0.0;
};

// Joint ridge regression of f(x, u) . grad psi_x onto [psi_x; psi_xu].
// The data must contain both u = 0 and u != 0 samples.
KoopmanControlModel fit_control_model(const System& system, const std::vector<ControlSample>& samples,
                                      std::shared_ptr<const Dictionary> state_dictionary,
                                      std::shared_ptr<const ControlDictionary> control_dictionary,
                                      std::optional<double> gamma = std::nullopt);

// L_x = Q D Q^-1, B~ = Q^-1 L_xu.
struct LiftedDecomposition {
  ComplexMatrix Q;
  ComplexMatrix Q_inv;
  ComplexVector D;
  ComplexMatrix B_tilde;
  std::vector<std::size_t> null_rows;  // |D_ii| <= threshold
  double null_threshold = 0.0;
  double reconstruction_error = 0.0;   // |L_x - Q D Q^-1| / |L_x|
  double condition_number = 1.0;
};

constexpr double kDefaultNullThreshold = 1e-6;

// Throws NumericalError when the eigenvector matrix has condition number above 1e12.
LiftedDecomposition eigen_decompose_control(const KoopmanControlModel& model,
                                            double null_threshold = kDefaultNullThreshold);

// max over null rows r of |B~_r| * B. Throws ConfigError without null rows.
double null_rate_bound(const LiftedDecomposition& decomposition, double input_bound);

struct InputBoundEstimate {
  double bound = 0.0;       // 1.1 x empirical sup
  double empirical_sup = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

// Empirical sup of |psi_xu(x, u)| over a seeded uniform sample of the admissible box.
InputBoundEstimate estimate_input_bound(const ControlDictionary& dictionary, const Box& state_box,
                                        const Box& input_box, std::size_t samples,
                                        std::uint64_t seed);

// Piecewise-constant input u(t): segment k holds from starts[k] until starts[k+1].
class InputSchedule {
 public:
  InputSchedule() = default;
  InputSchedule(std::vector<double> starts, std::vector<Vector> values, std::string description);
  static InputSchedule constant(const Vector& value);

  [[nodiscard]] Vector at(double t) const;
  [[nodiscard]] std::size_t input_dimension() const;
  [[nodiscard]] double sup_norm() const;
  [[nodiscard]] const std::string& description() const { return description_; }
  [[nodiscard]] const std::vector<Vector>& values() const { return values_; }
  [[nodiscard]] nlohmann::json to_json() const;
  static InputSchedule from_json(const nlohmann::json& j);

 private:
  std::vector<double> starts_;
  std::vector<Vector> values_;
  std::string description_;
};

struct CrossingSample {
  double t = 0.0;
  Vector x_true;
  Vector x_lifted;
  double indicator_true = 0.0;
  double indicator_lifted = 0.0;
  double null_change = 0.0;  // max over null rows of |phi_r(t) - phi_r(0)|
};

struct ExperimentReport {
  std::string scenario;
  std::string schedule_description;
  nlohmann::json schedule;
  Vector x0;
  double horizon = 0.0;
  std::optional<double> crossing_time;
  std::size_t start_basin = 0;
  std::size_t indicator_basin = 0;  // basin whose indicator is tracked
  double input_bound = 0.0;
  double input_bound_empirical_sup = 0.0;
  std::size_t input_bound_samples = 0;
  double null_rate_bound = 0.0;
  std::vector<std::size_t> null_rows;
  double null_change_at_crossing = 0.0;
  double certified_change_at_crossing = 0.0;
  bool certified = false;
  double max_realized_null_rate = 0.0;
  std::optional<double> indicator_error_at_crossing;
  double max_indicator_error = 0.0;
  double model_residual = 0.0;
  double reconstruction_error = 0.0;
  bool lifted_truncated = false;
  std::vector<CrossingSample> series;

  [[nodiscard]] nlohmann::json to_json() const;
};

// Relative slack allowed on the certified null-rate inequality.
constexpr double kCertificateSlack = 1e-6;
constexpr double kCrossingGrid = 1e-3;

struct CrossingSetup {
  std::string scenario = "scenario";
  Vector x0;
  InputSchedule schedule;
  double horizon = 3.0;
  Box state_box;  // admissible states; also where psi_xu is clamped in the rollout
  Box input_box;
  InputBoundEstimate input_bound;
  std::vector<FixedPoint> fixed_points;  // of the uncontrolled system
  double basin_horizon = kDefaultBasinHorizon;
  double capture_radius = kDefaultCaptureRadius;
  double tol = 1e-10;
};

// Runs the true controlled system and the lifted model side by side on a
// 1e-3 grid. Basin labels come from flowing the uncontrolled system; the
// tracked indicator is the one of the first stable basin other than the start.
ExperimentReport basin_crossing_experiment(const System& true_system, const KoopmanControlModel& model,
                                           const LiftedDecomposition& decomposition,
                                           const CrossingSetup& setup);

void write_crossing_csv(std::ostream& os, const ExperimentReport& report);

struct LiftedTrajectory {
  std::vector<double> times;
  std::vector<Vector> psi;  // Re(Q phi)
  bool truncated = false;
};

// Closed loop psi_xu = -F psi_x: phi' = D phi - B~ F Q phi, reported as psi = Re(Q phi).
LiftedTrajectory feedback_rollout(const KoopmanControlModel& model,
                                  const LiftedDecomposition& decomposition, const Matrix& gain,
                                  const Vector& x0, double horizon, std::size_t samples = 101);

}  // namespace koopcheck
