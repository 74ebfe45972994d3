#include "koopcheck/systems.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

#include "koopcheck/integrator.hpp"
#include "parallel.hpp"

namespace koopcheck {

System::System(VectorFieldSpec spec, FieldFn field, std::optional<JacobianFn> jacobian)
    : spec_(std::move(spec)), field_(std::move(field)), jacobian_(std::move(jacobian)) {
  if (spec_.dimension == 0) throw ConfigError("system dimension must be positive");
  if (!field_) throw ConfigError("system '" + spec_.name + "' has no vector field");
}

double System::parameter(const std::string& key) const {
  const auto it = spec_.parameters.find(key);
  if (it == spec_.parameters.end())
    throw ConfigError("system '" + spec_.name + "' has no parameter '" + key + "'");
  return it->second;
}

Matrix System::jacobian(const Vector& x) const {
  if (jacobian_) return (*jacobian_)(x);
  const auto d = static_cast<Eigen::Index>(spec_.dimension);
  const Vector u = Vector::Zero(static_cast<Eigen::Index>(spec_.control_arity));
  Matrix jac(d, d);
  Vector xp = x, xm = x, fp(d), fm(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    eval_into(xp, u, fp);
    eval_into(xm, u, fm);
    jac.col(j) = (fp - fm) / (2.0 * h);
    xp[j] = xm[j] = x[j];
  }
  return jac;
}

System System::with_linear_matrix(Matrix a) const {
  System copy = *this;
  copy.linear_matrix_ = std::move(a);
  return copy;
}

System System::with_closed_orbits(bool closed) const {
  System copy = *this;
  copy.closed_orbits_ = closed;
  return copy;
}

namespace {

std::map<std::string, double> merge_parameters(const std::string& name,
                                               std::map<std::string, double> defaults,
                                               const std::map<std::string, double>& given) {
  for (const auto& [key, value] : given) {
    auto it = defaults.find(key);
    if (it == defaults.end())
      throw ConfigError("system '" + name + "' does not accept parameter '" + key + "'");
    if (!std::isfinite(value))
      throw ConfigError("parameter '" + key + "' of system '" + name + "' is not finite");
    it->second = value;
  }
  return defaults;
}

VectorFieldSpec make_spec(const std::string& name, std::size_t d,
                          std::map<std::string, double> params, std::size_t arity = 0) {
  return VectorFieldSpec{name, d, std::move(params), arity};
}

System make_duffing(const std::string& name, double delta, bool closed) {
  auto spec = make_spec(name, 2, closed ? std::map<std::string, double>{}
                                        : std::map<std::string, double>{{"delta", delta}});
  FieldFn f = [delta](std::span<const double> x, std::span<const double>, std::span<double> out) {
    out[0] = x[1];
    out[1] = x[0] - x[0] * x[0] * x[0] - delta * x[1];
  };
  JacobianFn jac = [delta](const Vector& x) {
    Matrix j(2, 2);
    j << 0.0, 1.0, 1.0 - 3.0 * x[0] * x[0], -delta;
    return j;
  };
  return System(std::move(spec), std::move(f), std::move(jac)).with_closed_orbits(closed);
}

}  // namespace

std::vector<std::string> registered_systems() {
  return {"linear_scalar",    "linear_diagonal",     "harmonic",
          "bistable",         "duffing",             "duffing_undamped",
          "controlled_bistable", "controlled_linear_scalar"};
}

System make_system(const std::string& name, const std::map<std::string, double>& parameters) {
  if (name == "linear_scalar") {
    const auto p = merge_parameters(name, {{"a", -1.0}}, parameters);
    const double a = p.at("a");
    FieldFn f = [a](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = a * x[0];
    };
    JacobianFn jac = [a](const Vector&) { return Matrix::Constant(1, 1, a); };
    return System(make_spec(name, 1, p), std::move(f), std::move(jac))
        .with_linear_matrix(Matrix::Constant(1, 1, a));
  }
  if (name == "linear_diagonal") {
    const auto p = merge_parameters(name, {{"a1", -1.0}, {"a2", -2.0}}, parameters);
    const double a1 = p.at("a1"), a2 = p.at("a2");
    FieldFn f = [a1, a2](std::span<const double> x, std::span<const double>,
                         std::span<double> out) {
      out[0] = a1 * x[0];
      out[1] = a2 * x[1];
    };
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = a1;
    a(1, 1) = a2;
    JacobianFn jac = [a](const Vector&) { return a; };
    return System(make_spec(name, 2, p), std::move(f), std::move(jac)).with_linear_matrix(a);
  }
  if (name == "harmonic") {
    const auto p = merge_parameters(name, {}, parameters);
    FieldFn f = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = x[1];
      out[1] = -x[0];
    };
    Matrix a(2, 2);
    a << 0.0, 1.0, -1.0, 0.0;
    JacobianFn jac = [a](const Vector&) { return a; };
    return System(make_spec(name, 2, p), std::move(f), std::move(jac))
        .with_linear_matrix(a)
        .with_closed_orbits(true);
  }
  if (name == "bistable") {
    const auto p = merge_parameters(name, {}, parameters);
    FieldFn f = [](std::span<const double> x, std::span<const double>, std::span<double> out) {
      out[0] = x[0] - x[0] * x[0] * x[0];
    };
    JacobianFn jac = [](const Vector& x) {
      return Matrix::Constant(1, 1, 1.0 - 3.0 * x[0] * x[0]);
    };
    return System(make_spec(name, 1, p), std::move(f), std::move(jac));
  }
  if (name == "duffing") {
    const auto p = merge_parameters(name, {{"delta", 0.5}}, parameters);
    return make_duffing(name, p.at("delta"), false);
  }
  if (name == "duffing_undamped") {
    merge_parameters(name, {}, parameters);
    return make_duffing(name, 0.0, true);
  }
  if (name == "controlled_bistable") {
    const auto p = merge_parameters(name, {}, parameters);
    FieldFn f = [](std::span<const double> x, std::span<const double> u, std::span<double> out) {
      out[0] = x[0] - x[0] * x[0] * x[0] + (u.empty() ? 0.0 : u[0]);
    };
    JacobianFn jac = [](const Vector& x) {
      return Matrix::Constant(1, 1, 1.0 - 3.0 * x[0] * x[0]);
    };
    return System(make_spec(name, 1, p, 1), std::move(f), std::move(jac));
  }
  if (name == "controlled_linear_scalar") {
    const auto p = merge_parameters(name, {{"a", -1.0}, {"b", 1.0}}, parameters);
    const double a = p.at("a"), b = p.at("b");
    FieldFn f = [a, b](std::span<const double> x, std::span<const double> u,
                       std::span<double> out) {
      out[0] = a * x[0] + (u.empty() ? 0.0 : b * u[0]);
    };
    JacobianFn jac = [a](const Vector&) { return Matrix::Constant(1, 1, a); };
    return System(make_spec(name, 1, p, 1), std::move(f), std::move(jac))
        .with_linear_matrix(Matrix::Constant(1, 1, a));
  }
  throw ConfigError("unknown system '" + name + "'");
}

Vector eval_vector_field(const System& system, const Vector& x, const Vector& u) {
  if (static_cast<std::size_t>(x.size()) != system.dimension())
    throw ConfigError("state dimension " + std::to_string(x.size()) + " does not match system '" +
                      system.name() + "' (" + std::to_string(system.dimension()) + ")");
  if (static_cast<std::size_t>(u.size()) != system.control_arity())
    throw ConfigError("control dimension does not match arity of system '" + system.name() + "'");
  if (!x.allFinite() || !u.allFinite()) throw ConfigError("vector field input is not finite");
  Vector out(x.size());
  system.eval_into(x, u, out);
  return out;
}

namespace {

OdeRhs make_rhs(const System& system, const InputSignal& input) {
  const auto arity = static_cast<Eigen::Index>(system.control_arity());
  if (arity == 0 || !input) {
    const Vector zero = Vector::Zero(arity);
    return [&system, zero](double, const Vector& y, Vector& dy) {
      system.eval_into(y, zero, dy);
    };
  }
  return [&system, input, u = Vector(arity)](double t, const Vector& y, Vector& dy) mutable {
    input(t, std::span<double>(u.data(), static_cast<std::size_t>(u.size())));
    system.eval_into(y, u, dy);
  };
}

IntegratorOptions options_for(double tol) {
  if (!(tol > 0.0)) throw ConfigError("integration tolerance must be positive");
  IntegratorOptions opts;
  opts.abs_tol = tol;
  opts.rel_tol = tol;
  opts.escape_bound = kEscapeBound;
  return opts;
}

void check_state(const System& system, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != system.dimension())
    throw ConfigError("state dimension does not match system '" + system.name() + "'");
  if (!x.allFinite()) throw ConfigError("initial state is not finite");
}

}  // namespace

FlowResult flow(const System& system, const Vector& x0, double t, double tol,
                const InputSignal& input) {
  check_state(system, x0);
  const auto opts = options_for(tol);
  if (t == 0.0) return FlowResult{x0, false, 0.0};
  DormandPrince45 solver(make_rhs(system, input), x0.size(), opts);
  auto outcome = solver.integrate(x0, 0.0, t);
  return FlowResult{std::move(outcome.state), outcome.escaped, outcome.time};
}

Trajectory sample_trajectory(const System& system, const Vector& x0,
                             const std::vector<double>& times, double tol,
                             const InputSignal& input) {
  check_state(system, x0);
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]) && !(times[i] < times[i - 1]))
      throw ConfigError("trajectory times must be strictly monotone");
  }
  DormandPrince45 solver(make_rhs(system, input), x0.size(), options_for(tol));
  auto sampled = solver.sample(x0, 0.0, times);
  Trajectory traj;
  traj.integrator_tolerance = tol;
  traj.escaped = sampled.escaped;
  traj.times.assign(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(sampled.states.size()));
  traj.states = std::move(sampled.states);
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& trajectory) {
  const auto d = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x" << (i + 1);
  os << '\n';
  char buf[40];
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", trajectory.times[k]);
    os << buf;
    for (Eigen::Index i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", trajectory.states[k][i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::saddle: return "saddle";
    case Stability::non_hyperbolic: return "non-hyperbolic";
  }
  return "unknown";
}

Stability classify_jacobian(const std::vector<Complex>& eigenvalues) {
  bool any_pos = false, any_neg = false;
  for (const auto& mu : eigenvalues) {
    if (std::abs(mu.real()) < kNonHyperbolicTol) return Stability::non_hyperbolic;
    (mu.real() > 0.0 ? any_pos : any_neg) = true;
  }
  if (any_pos && any_neg) return Stability::saddle;
  return any_pos ? Stability::unstable : Stability::stable;
}

FixedPointSearch find_fixed_points(const System& system, const std::vector<Vector>& seeds,
                                   double tol) {
  if (!(tol > 0.0)) throw ConfigError("fixed-point tolerance must be positive");
  const auto d = static_cast<Eigen::Index>(system.dimension());
  const Vector u = Vector::Zero(static_cast<Eigen::Index>(system.control_arity()));
  FixedPointSearch result;

  for (const auto& seed : seeds) {
    check_state(system, seed);
    Vector x = seed;
    Vector fx(d);
    system.eval_into(x, u, fx);
    bool converged = fx.norm() <= tol;
    for (int it = 0; it < kNewtonMaxIterations && !converged; ++it) {
      const Eigen::ColPivHouseholderQR<Matrix> qr(system.jacobian(x));
      if (qr.rank() < d) break;
      x -= qr.solve(fx);
      if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > kEscapeBound) break;
      system.eval_into(x, u, fx);
      converged = fx.norm() <= tol;
    }
    if (!converged) {
      ++result.dropped_seeds;
      continue;
    }
    const bool duplicate = std::any_of(result.points.begin(), result.points.end(), [&](const auto& p) {
      return (p.location - x).template lpNorm<Eigen::Infinity>() <= kFixedPointDedupTol;
    });
    if (duplicate) continue;

    FixedPoint fp;
    fp.location = x;
    fp.residual_norm = fx.norm();
    const Eigen::EigenSolver<Matrix> es(system.jacobian(x), false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      fp.jacobian_eigenvalues.push_back(es.eigenvalues()[i]);
    std::sort(fp.jacobian_eigenvalues.begin(), fp.jacobian_eigenvalues.end(),
              [](const Complex& a, const Complex& b) {
                return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
              });
    fp.stability = classify_jacobian(fp.jacobian_eigenvalues);
    result.points.push_back(std::move(fp));
  }

  std::sort(result.points.begin(), result.points.end(), [](const FixedPoint& a, const FixedPoint& b) {
    return std::lexicographical_compare(a.location.begin(), a.location.end(), b.location.begin(),
                                        b.location.end());
  });
  return result;
}

BasinLabel classify_basin(const System& system, const Vector& x0,
                          const std::vector<FixedPoint>& fixed_points, double horizon,
                          double capture_radius, double tol) {
  if (!(horizon > 0.0)) throw ConfigError("basin horizon must be positive");
  if (!(capture_radius > 0.0)) throw ConfigError("capture radius must be positive");
  const auto end = flow(system, x0, horizon, tol);
  if (end.escaped) return BasinLabel{std::nullopt, true};
  std::optional<std::size_t> best;
  double best_dist = capture_radius;
  for (std::size_t i = 0; i < fixed_points.size(); ++i) {
    const double dist = (end.state - fixed_points[i].location).norm();
    if (dist <= best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return BasinLabel{best, false};
}

BasinGrid compute_basin_grid(const System& system, std::vector<Vector> points,
                             const std::vector<FixedPoint>& fixed_points, double horizon,
                             double capture_radius, double tol) {
  BasinGrid grid;
  grid.labels.resize(points.size());
  detail::parallel_for(points.size(), [&](std::size_t i) {
    grid.labels[i] = classify_basin(system, points[i], fixed_points, horizon, capture_radius, tol);
  });
  grid.points = std::move(points);
  grid.fixed_points = fixed_points;
  grid.horizon = horizon;
  grid.capture_radius = capture_radius;
  return grid;
}

SnapshotPairs sample_snapshot_pairs(const System& system, const Box& region, std::size_t n,
                                    double dt, std::uint64_t seed, double tol) {
  if (n == 0) throw ConfigError("snapshot count must be positive");
  if (!(dt > 0.0)) throw ConfigError("snapshot time step must be positive");
  if (static_cast<std::size_t>(region.dimension()) != system.dimension())
    throw ConfigError("sampling region dimension does not match system '" + system.name() + "'");

  SnapshotPairs pairs;
  pairs.dt = dt;
  pairs.seed = seed;
  pairs.region = region;
  pairs.tolerance = tol;
  pairs.x.reserve(n);
  pairs.y.reserve(n);

  DormandPrince45 solver(make_rhs(system, {}), region.dimension(), options_for(tol));
  Rng rng(seed);
  constexpr std::size_t kMaxResamples = 1'000'000;
  while (pairs.x.size() < n) {
    Vector x = uniform_in_box(rng, region);
    auto out = solver.integrate(x, 0.0, dt);
    if (out.escaped) {
      if (++pairs.resampled > kMaxResamples)
        throw NumericalError("snapshot sampling: too many escaping samples");
      continue;
    }
    pairs.x.push_back(std::move(x));
    pairs.y.push_back(std::move(out.state));
  }
  return pairs;
}

}  // namespace koopcheck
