#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "koopcheck/koopman_fit.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck {

// Closed-form Koopman eigenpair of a registered system, f . grad phi = lambda phi.
struct AnalyticOracle {
  std::string system_name;
  std::string expression_id;
  Complex lambda;
  ClosedForm phi;
  // Distance from x to the set where phi is undefined (+inf when phi is entire).
  std::function<double(const Vector&)> singular_distance;

  [[nodiscard]] bool defined_at(const Vector& x) const { return singular_distance(x) > 0.0; }
  [[nodiscard]] Eigenpair as_eigenpair() const;
};

// x' = x - x^3:  phi = x / sqrt|1 - x^2|,  lambda = 1.
AnalyticOracle bistable_unstable_oracle();
// x' = x - x^3:  phi = (1 - x^2) / x^2,   lambda = -2.
AnalyticOracle bistable_stable_oracle();
// x' = Ax:  phi = <w, x> for every left eigenvector w^T A = lambda w^T.
std::vector<AnalyticOracle> linear_oracles(const System& system);

struct OracleValidation {
  double max_error = 0.0;  // max |f.grad phi - lambda phi| / (1 + |phi|)
  std::size_t points = 0;
  bool passed = false;
};

constexpr double kOracleValidationTol = 1e-8;

// Checks the generator relation at `n` seeded points of `region` that lie in
// the oracle's domain. The directional derivative f . grad phi is taken by a
// Richardson-extrapolated central difference along f, with the step scaled by
// the distance to the singular set; it never touches an analytic derivative.
OracleValidation validate_oracle(const AnalyticOracle& oracle, const System& system,
                                 const Box& region, std::size_t n, std::uint64_t seed);

// Registry: the oracles known for a system, each validated on registration
// (1000 seeded points in [-2, 2]^d). Throws NumericalError if one fails.
std::vector<AnalyticOracle> oracles_for(const System& system);

}  // namespace koopcheck
