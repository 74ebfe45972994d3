#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "koopcheck/koopman_fit.hpp"
#include "koopcheck/report.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck {

constexpr double kReferenceTolerance = 1e-10;

// max over starts x times of |phi(F^t x) - e^{lambda t} phi(x)| / (1 + |phi(x)|).
// Escaping starts and starts outside the domain of phi are counted and skipped.
TheoremReport verify_eigen_evolution(const Eigenpair& pair, const System& system,
                                     const std::vector<Vector>& starts,
                                     const std::vector<double>& times, double tol,
                                     double integrator_tol = kReferenceTolerance);

// Eigenfunctions with a nonzero rate vanish at fixed points.
TheoremReport check_fixed_point_zero(const std::vector<Eigenpair>& pairs,
                                     const std::vector<FixedPoint>& fixed_points, double tol_lambda,
                                     double tol_phi);

// Sublevel sets M(c) = {|phi| <= c} of a pair with Re lambda <= 0 are forward invariant.
TheoremReport check_level_set_invariance(const Eigenpair& pair, const System& system, double c,
                                         const std::vector<Vector>& starts, double horizon,
                                         double drift_tol, double sample_dt = 0.01,
                                         double integrator_tol = kReferenceTolerance);

// With Re lambda > 0 and 0 < eps <= |phi| <= C on M, every trajectory leaves
// M before T = ln(C/eps) / Re lambda. eps and C come from a dense tensor grid
// of M with `dense_resolution` nodes per axis.
TheoremReport check_escape_time(const Eigenpair& pair, const System& system, const Box& region,
                                const std::vector<Vector>& starts, double tol,
                                int dense_resolution = 1001,
                                double integrator_tol = kReferenceTolerance);

// |lambda| <= 1e-3 for continuous rates, |lambda_d - 1| <= 1e-3 for discrete ones.
constexpr double kInvariantRateTol = 1e-3;
bool has_near_zero_rate(const Eigenpair& pair, double tol = kInvariantRateTol);

// Per-basin statistics of Re phi over the grid points labelled with a stable
// fixed point.
struct BasinSeparation {
  std::vector<std::size_t> basins;  // fixed-point indices
  std::vector<double> means;
  std::vector<std::size_t> counts;
  double within_std = 0.0;  // pooled
  double gap = 0.0;         // smallest pairwise gap of basin means
  double accuracy = 0.0;    // nearest-mean classification vs grid labels
  std::size_t undefined = 0;
};
BasinSeparation basin_separation(const Eigenpair& pair, const BasinGrid& grid);

// Index of the near-zero-rate pair with the largest gap / within_std ratio.
std::optional<std::size_t> select_invariant_pair(const std::vector<Eigenpair>& pairs,
                                                 const BasinGrid& grid);

// Eigenfunctions with lambda ~ 0 are constant on each basin.
TheoremReport check_basin_constancy(const Eigenpair& pair, const BasinGrid& grid,
                                    double separation_tol);

enum class ManifoldDirection { stable, unstable };

constexpr double kDefaultBoundCap = 1e3;
// Pairs with |Re lambda| below this are treated as neither growing nor decaying.
constexpr double kManifoldRateMargin = 1e-6;

// A bounded eigenfunction vanishes on the stable manifold (Re lambda > 0) or
// the unstable manifold (Re lambda < 0) of an equilibrium. Boundedness is
// checked on `region_samples`: phi must be defined, finite and below
// `bound_cap` there, otherwise the corollary does not apply. With `equilibrium`
// the relative |phi| there is reported as well.
TheoremReport check_zero_on_invariant_manifold(const Eigenpair& pair,
                                               const std::vector<Vector>& manifold_samples,
                                               ManifoldDirection direction, double tol,
                                               const std::vector<Vector>& region_samples,
                                               double bound_cap = kDefaultBoundCap,
                                               const Vector* equilibrium = nullptr);

// Points along both branches of a saddle's unstable manifold, traced by
// forward integration from x* +- offset v (v the most unstable direction).
std::vector<Vector> trace_unstable_manifold(const System& system, const FixedPoint& saddle,
                                            double offset, double horizon,
                                            std::size_t samples_per_branch,
                                            double tol = kReferenceTolerance);

// Equally spaced samples along the orbits through `starts`.
std::vector<Vector> sample_orbits(const System& system, const std::vector<Vector>& starts,
                                  double horizon, std::size_t samples_per_orbit,
                                  double tol = kReferenceTolerance);

// On systems with closed orbits, pairs off the imaginary axis vanish on the orbits.
TheoremReport check_closed_orbit_spectrum(const std::vector<Eigenpair>& pairs, const System& system,
                                          const std::vector<Vector>& orbit_samples,
                                          const std::vector<Vector>& region_samples, double tol_re,
                                          double tol_phi);

// |phi| grows without bound on approach to a stable fixed point when Re lambda > 0.
// Probes x* +- r e_j for every axis j.
TheoremReport check_blowup_near_stable_point(const Eigenpair& pair, const FixedPoint& fixed_point,
                                             const std::vector<double>& approach_radii,
                                             double threshold);

// With Re lambda != 0 and 0 < eps <= phi <= C on M, every trajectory leaves M.
TheoremReport check_exit_when_bounded_away(const Eigenpair& pair, const System& system,
                                           const Box& region, const std::vector<Vector>& starts,
                                           double horizon, int dense_resolution = 1001,
                                           double integrator_tol = kReferenceTolerance);

// Matches generator eigenvalues to discrete ones through exp(lambda dt).
struct SpectrumMatch {
  Complex generator;
  Complex discrete;
  double mapping_error = 0.0;  // |exp(lambda_g dt) - lambda_d|
  bool classified = false;     // |Re lambda_g| > boundary_tol
  bool class_agrees = false;   // sign(Re lambda_g) vs inside/outside the unit circle
};
struct SpectrumComparison {
  std::vector<SpectrumMatch> matches;
  double max_mapping_error = 0.0;
  double class_agreement = 1.0;  // fraction over classified matches
};
SpectrumComparison compare_spectra(const std::vector<Complex>& generator,
                                   const std::vector<Complex>& discrete, double dt,
                                   double boundary_tol = 1e-6);

}  // namespace koopcheck
