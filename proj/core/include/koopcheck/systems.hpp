#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "koopcheck/common.hpp"

namespace koopcheck {

struct VectorFieldSpec {
  std::string name;
  std::size_t dimension = 0;
  std::map<std::string, double> parameters;
  std::size_t control_arity = 0;
};

// f(x, u) written into `out`; u is empty for autonomous systems.
using FieldFn =
    std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> out)>;
using JacobianFn = std::function<Matrix(const Vector& x)>;

// A vector field x' = f(x) or x' = f(x, u). Immutable after construction.
class System {
 public:
  System(VectorFieldSpec spec, FieldFn field, std::optional<JacobianFn> jacobian = std::nullopt);

  [[nodiscard]] const VectorFieldSpec& spec() const { return spec_; }
  [[nodiscard]] const std::string& name() const { return spec_.name; }
  [[nodiscard]] std::size_t dimension() const { return spec_.dimension; }
  [[nodiscard]] std::size_t control_arity() const { return spec_.control_arity; }
  [[nodiscard]] double parameter(const std::string& key) const;

  // Unchecked hot path used by the integrator.
  void eval_into(std::span<const double> x, std::span<const double> u, std::span<double> out) const {
    field_(x, u, out);
  }
  void eval_into(const Vector& x, const Vector& u, Vector& out) const {
    field_(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
           std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
           std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  }

  // State Jacobian at u = 0: analytic when registered, central differences otherwise.
  [[nodiscard]] Matrix jacobian(const Vector& x) const;
  [[nodiscard]] bool has_analytic_jacobian() const { return jacobian_.has_value(); }

  // System matrix A for linear fields x' = Ax.
  [[nodiscard]] const std::optional<Matrix>& linear_matrix() const { return linear_matrix_; }
  // True for conservative benchmarks whose bounded orbits are closed.
  [[nodiscard]] bool has_closed_orbits() const { return closed_orbits_; }

  System with_linear_matrix(Matrix a) const;
  System with_closed_orbits(bool closed) const;

 private:
  VectorFieldSpec spec_;
  FieldFn field_;
  std::optional<JacobianFn> jacobian_;
  std::optional<Matrix> linear_matrix_;
  bool closed_orbits_ = false;
};

// Registry of launch benchmarks:
//   linear_scalar            x' = a x                         (a = -1)
//   linear_diagonal          x' = a1 x, y' = a2 y             (a1 = -1, a2 = -2)
//   harmonic                 x' = y, y' = -x
//   bistable                 x' = x - x^3
//   duffing                  x' = y, y' = x - x^3 - delta y   (delta = 0.5)
//   duffing_undamped         x' = y, y' = x - x^3
//   controlled_bistable      x' = x - x^3 + u
//   controlled_linear_scalar x' = a x + b u                   (a = -1, b = 1)
// Unknown names or parameter keys throw ConfigError.
System make_system(const std::string& name, const std::map<std::string, double>& parameters = {});
std::vector<std::string> registered_systems();

Vector eval_vector_field(const System& system, const Vector& x, const Vector& u = Vector());

// Piecewise input signal u(t) for controlled systems.
using InputSignal = std::function<void(double t, std::span<double> u)>;

constexpr double kEscapeBound = 1e6;

struct FlowResult {
  Vector state;
  bool escaped = false;
  double time_reached = 0.0;
};

// F^t(x0). Negative t integrates backward. Blow-up past kEscapeBound is
// reported through `escaped`, never thrown.
FlowResult flow(const System& system, const Vector& x0, double t, double tol,
                const InputSignal& input = {});

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  double integrator_tolerance = 0.0;
  bool escaped = false;
};

Trajectory sample_trajectory(const System& system, const Vector& x0,
                             const std::vector<double>& times, double tol,
                             const InputSignal& input = {});
void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory);

enum class Stability { stable, unstable, saddle, non_hyperbolic };
std::string to_string(Stability s);

struct FixedPoint {
  Vector location;
  std::vector<Complex> jacobian_eigenvalues;
  Stability stability = Stability::non_hyperbolic;
  double residual_norm = 0.0;
};

struct FixedPointSearch {
  std::vector<FixedPoint> points;  // sorted lexicographically by location
  std::size_t dropped_seeds = 0;   // seeds whose Newton iteration did not converge
};

constexpr double kFixedPointDedupTol = 1e-8;
constexpr int kNewtonMaxIterations = 50;
constexpr double kNonHyperbolicTol = 1e-6;

FixedPointSearch find_fixed_points(const System& system, const std::vector<Vector>& seeds,
                                   double tol);
Stability classify_jacobian(const std::vector<Complex>& eigenvalues);

constexpr double kDefaultBasinHorizon = 50.0;
constexpr double kDefaultCaptureRadius = 1e-2;

struct BasinLabel {
  std::optional<std::size_t> fixed_point;  // index into the fixed-point list
  bool escaped = false;

  [[nodiscard]] bool resolved() const { return fixed_point.has_value(); }
  bool operator==(const BasinLabel&) const = default;
};

BasinLabel classify_basin(const System& system, const Vector& x0,
                          const std::vector<FixedPoint>& fixed_points, double horizon,
                          double capture_radius, double tol);

struct BasinGrid {
  std::vector<Vector> points;
  std::vector<BasinLabel> labels;
  std::vector<FixedPoint> fixed_points;
  double horizon = kDefaultBasinHorizon;
  double capture_radius = kDefaultCaptureRadius;
};

// Labels every point; evaluation is data-parallel but ordered by input index.
BasinGrid compute_basin_grid(const System& system, std::vector<Vector> points,
                             const std::vector<FixedPoint>& fixed_points, double horizon,
                             double capture_radius, double tol);

struct SnapshotPairs {
  std::vector<Vector> x;
  std::vector<Vector> y;
  double dt = 0.0;
  std::uint64_t seed = 0;
  Box region;
  double tolerance = 0.0;
  std::size_t resampled = 0;

  [[nodiscard]] std::size_t size() const { return x.size(); }
};

// n pairs (x_k, F^dt(x_k)) with x_k uniform in `region`. Samples whose flow
// escapes are redrawn and counted in `resampled`.
SnapshotPairs sample_snapshot_pairs(const System& system, const Box& region, std::size_t n,
                                    double dt, std::uint64_t seed, double tol);

}  // namespace koopcheck
