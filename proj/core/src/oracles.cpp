#include "koopcheck/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace koopcheck {

Eigenpair AnalyticOracle::as_eigenpair() const {
  Eigenpair pair;
  pair.lambda = lambda;
  pair.source = EigenSource::analytic_oracle;
  pair.closed_form = phi;
  pair.label = expression_id;
  return pair;
}

AnalyticOracle bistable_unstable_oracle() {
  AnalyticOracle o;
  o.system_name = "bistable";
  o.expression_id = "x/sqrt|1-x^2|";
  o.lambda = Complex(1.0, 0.0);
  o.phi = [](const Vector& x) -> std::optional<Complex> {
    const double s = std::abs(1.0 - x[0] * x[0]);
    if (s == 0.0) return std::nullopt;
    return Complex(x[0] / std::sqrt(s), 0.0);
  };
  o.singular_distance = [](const Vector& x) { return std::abs(std::abs(x[0]) - 1.0); };
  return o;
}

AnalyticOracle bistable_stable_oracle() {
  AnalyticOracle o;
  o.system_name = "bistable";
  o.expression_id = "(1-x^2)/x^2";
  o.lambda = Complex(-2.0, 0.0);
  o.phi = [](const Vector& x) -> std::optional<Complex> {
    if (x[0] == 0.0) return std::nullopt;
    return Complex((1.0 - x[0] * x[0]) / (x[0] * x[0]), 0.0);
  };
  o.singular_distance = [](const Vector& x) { return std::abs(x[0]); };
  return o;
}

std::vector<AnalyticOracle> linear_oracles(const System& system) {
  const auto& a = system.linear_matrix();
  if (!a) throw ConfigError("system '" + system.name() + "' is not linear");
  const Eigen::EigenSolver<Matrix> es(a->transpose(), true);
  std::vector<AnalyticOracle> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    ComplexVector w = es.eigenvectors().col(i);
    // Largest coefficient real positive, unit max-norm.
    Eigen::Index k = 0;
    w.cwiseAbs().maxCoeff(&k);
    w /= w[k];
    AnalyticOracle o;
    o.system_name = system.name();
    o.expression_id = "<w" + std::to_string(i) + ",x>";
    o.lambda = es.eigenvalues()[i];
    o.phi = [w](const Vector& x) -> std::optional<Complex> {
      return (w.transpose() * x.cast<Complex>()).value();
    };
    o.singular_distance = [](const Vector&) { return std::numeric_limits<double>::infinity(); };
    out.push_back(std::move(o));
  }
  std::sort(out.begin(), out.end(), [](const AnalyticOracle& p, const AnalyticOracle& q) {
    if (p.lambda.real() != q.lambda.real()) return p.lambda.real() > q.lambda.real();
    return p.lambda.imag() > q.lambda.imag();
  });
  return out;
}

OracleValidation validate_oracle(const AnalyticOracle& oracle, const System& system,
                                 const Box& region, std::size_t n, std::uint64_t seed) {
  if (static_cast<std::size_t>(region.dimension()) != system.dimension())
    throw ConfigError("validation region dimension does not match the system");
  Rng rng(seed);
  OracleValidation result;
  const Vector u = Vector::Zero(static_cast<Eigen::Index>(system.control_arity()));
  Vector f(region.dimension());
  std::size_t attempts = 0;
  while (result.points < n) {
    if (++attempts > 100 * n + 1000) throw NumericalError("oracle domain too small to sample");
    const Vector x = uniform_in_box(rng, region);
    const double dist = oracle.singular_distance(x);
    if (!(dist > 1e-3)) continue;
    system.eval_into(x, u, f);
    const double speed = f.norm();
    const Complex value = *oracle.phi(x);
    Complex derivative(0.0, 0.0);
    if (speed > 0.0) {
      const Vector dir = f / speed;
      const double h = 1e-3 * std::min(1.0, dist);
      auto central = [&](double step) {
        return (*oracle.phi(x + step * dir) - *oracle.phi(x - step * dir)) / (2.0 * step);
      };
      derivative = speed * (4.0 * central(0.5 * h) - central(h)) / 3.0;
    }
    const double err = std::abs(derivative - oracle.lambda * value) / (1.0 + std::abs(value));
    result.max_error = std::max(result.max_error, err);
    ++result.points;
  }
  result.passed = result.max_error <= kOracleValidationTol;
  return result;
}

std::vector<AnalyticOracle> oracles_for(const System& system) {
  std::vector<AnalyticOracle> out;
  if (system.name() == "bistable") {
    out.push_back(bistable_unstable_oracle());
    out.push_back(bistable_stable_oracle());
  } else if (system.linear_matrix() && system.control_arity() == 0) {
    out = linear_oracles(system);
  }
  const auto d = static_cast<Eigen::Index>(system.dimension());
  const Box region(Vector::Constant(d, -2.0), Vector::Constant(d, 2.0));
  for (const auto& o : out) {
    const auto v = validate_oracle(o, system, region, 1000, fnv1a64(o.expression_id));
    if (!v.passed)
      throw NumericalError("oracle " + o.expression_id + " failed validation (max error " +
                           std::to_string(v.max_error) + ")");
  }
  return out;
}

}  // namespace koopcheck
