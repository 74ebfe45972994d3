#include <doctest.h>

#include "helpers.hpp"
#include "koopcheck/checks.hpp"
#include "koopcheck/oracles.hpp"
#include "koopcheck/systems.hpp"

using namespace koopcheck;
using testing::vec;

namespace {

const System& bistable() {
  static const System s = make_system("bistable");
  return s;
}

const std::vector<FixedPoint>& bistable_fps() {
  static const auto fps = find_fixed_points(bistable(), grid_points(testing::box1(-2, 2), {41}), 1e-12).points;
  return fps;
}

std::vector<Vector> uniform_starts(const Box& box, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out;
  for (int k = 0; k < n; ++k) out.push_back(uniform_in_box(rng, box));
  return out;
}

Eigenpair wrong_rate(Eigenpair p, double re) {
  p.lambda = Complex(re, 0.0);
  return p;
}

}  // namespace

TEST_SUITE("checks") {
  TEST_CASE("eigen evolution of the oracles") {
    const auto starts = uniform_starts(testing::box1(0.05, 0.95), 30, 1);
    const auto r = verify_eigen_evolution(bistable_unstable_oracle().as_eigenpair(), bistable(), starts, {0.1, 0.5, 1.0},
                                          1e-6);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("max_deviation") <= 1e-8);
    const auto bad = verify_eigen_evolution(wrong_rate(bistable_unstable_oracle().as_eigenpair(), 0.5), bistable(),
                                            starts, {0.5}, 1e-6);
    CHECK(bad.verdict == Verdict::violated);
    // starts on the singular set are skipped, not counterexamples
    const auto skip = verify_eigen_evolution(bistable_stable_oracle().as_eigenpair(), bistable(), {vec({0.0})}, {0.1},
                                             1e-6);
    CHECK(skip.statistics.at("undefined_starts") == 1.0);
    CHECK(skip.verdict != Verdict::violated);
  }

  TEST_CASE("eigenfunctions vanish at fixed points") {
    const auto r = check_fixed_point_zero(
        {bistable_unstable_oracle().as_eigenpair(), bistable_stable_oracle().as_eigenpair()}, bistable_fps(), 1e-3,
        1e-10);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("max_abs_phi_at_fixed_points") <= 1e-10);
    // phi1 undefined at +-1, phi2 undefined at 0
    CHECK(r.statistics.at("not_applicable") == 3.0);

    Eigenpair shifted = bistable_unstable_oracle().as_eigenpair();
    shifted.closed_form = [](const Vector& x) -> std::optional<Complex> { return Complex(x[0] + 0.5, 0.0); };
    CHECK(check_fixed_point_zero({shifted}, bistable_fps(), 1e-3, 1e-10).verdict == Verdict::violated);
    // a zero-rate pair is excluded, leaving nothing to test
    const auto none = check_fixed_point_zero({wrong_rate(shifted, 0.0)}, bistable_fps(), 1e-3, 1e-10);
    CHECK(none.statistics.at("pairs_excluded_small_rate") == 1.0);
    CHECK(none.verdict == Verdict::inconclusive);
  }

  TEST_CASE("blow-up near a stable fixed point") {
    const auto& fps = bistable_fps();
    const FixedPoint& plus = fps[2];
    REQUIRE(plus.location[0] == doctest::Approx(1.0));
    const auto r = check_blowup_near_stable_point(bistable_unstable_oracle().as_eigenpair(), plus,
                                                  {0.1, 0.01, 0.001}, 20.0);
    CHECK(r.verdict == Verdict::supported);
    // approach from inside: phi(0.999) = 0.999 / sqrt(1 - 0.998001)
    CHECK(r.statistics.at("min_abs_phi_at_smallest_radius") ==
          doctest::Approx(0.999 / std::sqrt(1 - 0.999 * 0.999)).epsilon(1e-3));
    CHECK(0.99 / std::sqrt(1 - 0.99 * 0.99) == doctest::Approx(7.018).epsilon(1e-4));
    CHECK(r.statistics.at("min_abs_phi_at_smallest_radius") == doctest::Approx(22.33).epsilon(1e-3));

    Eigenpair flat = bistable_unstable_oracle().as_eigenpair();
    flat.closed_form = [](const Vector& x) -> std::optional<Complex> { return Complex(x[0], 0.0); };
    CHECK(check_blowup_near_stable_point(flat, plus, {0.1, 0.01}, 20.0).verdict == Verdict::violated);
    // precondition: a decaying rate
    CHECK(check_blowup_near_stable_point(bistable_stable_oracle().as_eigenpair(), plus, {0.1}, 20.0).verdict ==
          Verdict::inconclusive);
  }

  TEST_CASE("escape time bound") {
    const Box m = testing::box1(0.1, 0.9);
    const auto starts = uniform_starts(m, 50, 2);
    const auto r = check_escape_time(bistable_unstable_oracle().as_eigenpair(), bistable(), m, starts, 0.01);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("epsilon") == doctest::Approx(0.1 / std::sqrt(0.99)).epsilon(1e-9));
    CHECK(r.statistics.at("epsilon") == doctest::Approx(0.1005).epsilon(1e-3));
    CHECK(r.statistics.at("C") == doctest::Approx(2.0647).epsilon(1e-4));
    CHECK(r.statistics.at("predicted_exit_bound") == doctest::Approx(3.022).epsilon(1e-3));
    CHECK(r.statistics.at("exited") == 50.0);
    CHECK(r.statistics.at("max_exit_time") <= r.statistics.at("predicted_exit_bound") * 1.01);
    // the start nearest the lower edge takes almost the full bound
    const auto edge = check_escape_time(bistable_unstable_oracle().as_eigenpair(), bistable(), m, {vec({0.1})}, 0.01);
    CHECK(edge.statistics.at("max_exit_over_bound") == doctest::Approx(1.0).epsilon(1e-3));
    // overstated rate predicts a bound that is too short
    const auto bad = check_escape_time(wrong_rate(bistable_unstable_oracle().as_eigenpair(), 2.0), bistable(), m,
                                       {vec({0.1})}, 0.01);
    CHECK(bad.verdict == Verdict::violated);
    // eps = 0 on a region through the zero of phi
    CHECK(check_escape_time(bistable_unstable_oracle().as_eigenpair(), bistable(), testing::box1(-0.5, 0.5),
                            {vec({0.2})}, 0.01)
              .verdict == Verdict::inconclusive);
  }

  TEST_CASE("exit when bounded away from zero") {
    const auto r = check_exit_when_bounded_away(bistable_stable_oracle().as_eigenpair(), bistable(),
                                                testing::box1(0.5, 0.9), uniform_starts(testing::box1(0.5, 0.9), 20, 4),
                                                20.0);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("exited") == 20.0);
    CHECK(r.statistics.at("epsilon") == doctest::Approx((1 - 0.81) / 0.81).epsilon(1e-6));
    CHECK(r.statistics.at("C") == doctest::Approx(3.0).epsilon(1e-6));
    // the time to reach 0.9 from 0.5 solves phi2(0.9) = e^{-2T} phi2(0.5)
    const auto one = check_exit_when_bounded_away(bistable_stable_oracle().as_eigenpair(), bistable(),
                                                  testing::box1(0.5, 0.9), {vec({0.5})}, 20.0);
    CHECK(one.statistics.at("max_exit_time") == doctest::Approx(0.5 * std::log(3.0 * 0.81 / 0.19)).epsilon(1e-3));
  }

  TEST_CASE("level-set invariance") {
    const auto pair = bistable_stable_oracle().as_eigenpair();
    const auto starts = uniform_starts(testing::box1(-2, 2), 100, 5);
    const auto r = check_level_set_invariance(pair, bistable(), 1.0, starts, 5.0, 1e-6);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("max_relative_exceedance") <= 1e-6);
    // |x| >= 1/sqrt 2 inside the level set
    CHECK(r.statistics.at("starts_in_level_set") + r.statistics.at("starts_excluded_outside") == 100.0);
    // the growing oracle leaves its level sets
    const auto bad = check_level_set_invariance(wrong_rate(bistable_unstable_oracle().as_eigenpair(), -1.0),
                                                bistable(), 1.0, uniform_starts(testing::box1(0.1, 0.6), 20, 6), 5.0,
                                                1e-6);
    CHECK(bad.verdict == Verdict::violated);
    CHECK(check_level_set_invariance(bistable_unstable_oracle().as_eigenpair(), bistable(), 1.0, starts, 5.0, 1e-6)
              .verdict == Verdict::inconclusive);
  }

  TEST_CASE("basin separation and constancy") {
    const auto grid = compute_basin_grid(bistable(), grid_points(testing::box1(-2, 2), {81}), bistable_fps(), 50.0,
                                         1e-2, 1e-10);
    Eigenpair sign;
    sign.lambda = Complex(0.0, 0.0);
    sign.source = EigenSource::analytic_oracle;
    sign.closed_form = [](const Vector& x) -> std::optional<Complex> { return Complex(x[0] > 0 ? 1.0 : -1.0, 0.0); };
    const auto s = basin_separation(sign, grid);
    CHECK(s.basins.size() == 2);
    CHECK(s.within_std == 0.0);
    CHECK(s.gap == doctest::Approx(2.0));
    CHECK(s.accuracy == 1.0);
    const auto r = check_basin_constancy(sign, grid, 0.05);
    CHECK(r.verdict == Verdict::supported);

    Eigenpair identity = sign;
    identity.closed_form = [](const Vector& x) -> std::optional<Complex> { return Complex(x[0], 0.0); };
    CHECK(check_basin_constancy(identity, grid, 0.05).verdict == Verdict::violated);
    CHECK(*select_invariant_pair({identity, sign}, grid) == 1);
    CHECK_FALSE(select_invariant_pair({wrong_rate(sign, -1.0)}, grid));
    CHECK(has_near_zero_rate(sign));
    Eigenpair disc = sign;
    disc.lambda_discrete = Complex(1.0005, 0.0);
    disc.source = EigenSource::discrete;
    CHECK(has_near_zero_rate(disc));
  }

  TEST_CASE("zero on invariant manifolds") {
    const auto up = bistable_unstable_oracle().as_eigenpair();
    const auto region = grid_points(testing::box1(-0.5, 0.5), {101});
    const Vector origin = vec({0.0});
    // growing rate: vanishes on the stable manifold of the repeller, which is {0}
    const auto r = check_zero_on_invariant_manifold(up, {origin}, ManifoldDirection::stable, 1e-10, region, 1e3,
                                                    &origin);
    CHECK(r.verdict == Verdict::supported);
    CHECK(r.statistics.at("relative_phi_at_equilibrium") == 0.0);
    // wrong direction for the sign of the rate
    CHECK(check_zero_on_invariant_manifold(up, {origin}, ManifoldDirection::unstable, 1e-10, region).verdict ==
          Verdict::inconclusive);
    // unbounded on the region: corollary does not apply
    CHECK(check_zero_on_invariant_manifold(up, {origin}, ManifoldDirection::stable, 1e-10,
                                           grid_points(testing::box1(-1, 1), {11}))
              .verdict == Verdict::inconclusive);
    Eigenpair shifted = up;
    shifted.closed_form = [](const Vector& x) -> std::optional<Complex> { return Complex(x[0] + 0.1, 0.0); };
    CHECK(check_zero_on_invariant_manifold(shifted, {origin}, ManifoldDirection::stable, 1e-3, region).verdict ==
          Verdict::violated);
  }

  TEST_CASE("unstable manifold of the Duffing saddle") {
    const auto sys = make_system("duffing", {{"delta", 0.5}});
    const auto fps = find_fixed_points(sys, grid_points(testing::box2(-2, 2), {9, 9}), 1e-12).points;
    const auto saddle = std::find_if(fps.begin(), fps.end(), [](const auto& f) { return f.stability == Stability::saddle; });
    REQUIRE(saddle != fps.end());
    const auto pts = trace_unstable_manifold(sys, *saddle, 1e-4, 60.0, 50);
    CHECK(pts.size() == 100);
    // the field is odd, so the branches mirror each other
    CHECK((pts[30] + pts[80]).norm() <= 1e-6);
    // both branches settle on the two wells
    CHECK(std::abs(std::abs(pts[49][0]) - 1.0) <= 1e-3);
    CHECK(std::abs(std::abs(pts[99][0]) - 1.0) <= 1e-3);
    CHECK(pts[49][0] * pts[99][0] < 0.0);
  }

  TEST_CASE("closed orbits and the imaginary axis") {
    const auto sys = make_system("harmonic");
    const auto orbit = sample_orbits(sys, {vec({1.0, 0.0})}, 10.0, 100);
    CHECK(orbit.size() == 100);
    for (const auto& p : orbit) CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-8));
    std::vector<Eigenpair> pairs;
    for (const auto& o : linear_oracles(sys)) pairs.push_back(o.as_eigenpair());
    const auto region = grid_points(testing::box2(-2, 2), {5, 5});
    const auto ok = check_closed_orbit_spectrum(pairs, sys, orbit, region, 1e-6, 0.05);
    CHECK(ok.verdict == Verdict::supported);
    CHECK(ok.statistics.at("fraction_near_imaginary_axis") == 1.0);
    pairs.push_back(wrong_rate(pairs[0], 0.3));
    CHECK(check_closed_orbit_spectrum(pairs, sys, orbit, region, 1e-6, 0.05).verdict == Verdict::violated);
  }

  TEST_CASE("spectrum comparison") {
    const std::vector<Complex> gen{{-1.0, 0.0}, {-2.0, 0.0}, {0.0, 0.0}};
    const std::vector<Complex> disc{std::exp(-0.2), {1.0, 0.0}, std::exp(-0.1)};
    const auto c = compare_spectra(gen, disc, 0.1);
    CHECK(c.matches.size() == 3);
    CHECK(c.max_mapping_error <= 1e-15);
    CHECK(c.class_agreement == 1.0);
    const auto bad = compare_spectra({{1.0, 0.0}}, {std::exp(-0.1)}, 0.1);
    CHECK(bad.class_agreement == 0.0);
    CHECK(bad.max_mapping_error == doctest::Approx(std::exp(0.1) - std::exp(-0.1)));
  }
}
