#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "koopcheck/common.hpp"

namespace koopcheck {

using OdeRhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

struct IntegratorOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  // Max-norm of the state beyond which the solution is reported as escaped.
  double escape_bound = 1e6;
  std::size_t max_steps = 10'000'000;
};

struct IntegrationOutcome {
  Vector state;
  double time = 0.0;
  bool escaped = false;
  std::size_t steps = 0;
};

struct SampledOutcome {
  std::vector<Vector> states;  // one per requested time actually reached
  bool escaped = false;
  double escape_time = 0.0;
};

// Dormand-Prince 5(4) embedded pair with FSAL, PI-free step control and the
// mixed error norm  sqrt(mean((e_i / (atol + rtol*max|y_i|))^2)) <= 1.
// Integrates forward or backward depending on the sign of t1 - t0.
class DormandPrince45 {
 public:
  DormandPrince45(OdeRhs rhs, Eigen::Index dimension, IntegratorOptions options = {});

  IntegrationOutcome integrate(const Vector& y0, double t0, double t1);

  // States at each of `times` (monotone, all on the same side of t0).
  // Steps are clipped so every output time is hit exactly.
  SampledOutcome sample(const Vector& y0, double t0, const std::vector<double>& times);

  [[nodiscard]] const IntegratorOptions& options() const { return options_; }

 private:
  enum class Status { ok, escaped };

  double initial_step(double t, const Vector& y, double direction);
  Status advance(Vector& y, double& t, double t_target, double& h, std::size_t& steps);
  double error_norm(const Vector& y, const Vector& y_new) const;

  OdeRhs rhs_;
  Eigen::Index dim_;
  IntegratorOptions options_;
  Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y_new_, err_;
  bool k1_valid_ = false;
};

}  // namespace koopcheck
