#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "koopcheck/systems.hpp"

using namespace koopcheck;
using testing::vec;

TEST_SUITE("systems") {
  TEST_CASE("vector field values at known points") {
    CHECK(eval_vector_field(make_system("bistable"), vec({1.0}))[0] == 0.0);
    CHECK(eval_vector_field(make_system("duffing", {{"delta", 0.5}}), vec({0.0, 0.0})).norm() == 0.0);
    CHECK(eval_vector_field(make_system("linear_scalar"), vec({2.0}))[0] == doctest::Approx(-2.0));
    // x' = y, y' = x - x^3 - delta y
    const Vector f = eval_vector_field(make_system("duffing", {{"delta", 0.5}}), vec({2.0, 1.0}));
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(2.0 - 8.0 - 0.5));
    CHECK(eval_vector_field(make_system("controlled_bistable"), vec({0.5}), vec({1.5}))[0] ==
          doctest::Approx(0.5 - 0.125 + 1.5));
  }

  TEST_CASE("registry errors") {
    CHECK_THROWS_AS(make_system("nope"), ConfigError);
    CHECK_THROWS_AS(make_system("duffing", {{"gamma", 1.0}}), ConfigError);
    CHECK_THROWS_AS(eval_vector_field(make_system("bistable"), vec({1.0, 2.0})), ConfigError);
    CHECK_THROWS_AS(eval_vector_field(make_system("controlled_bistable"), vec({1.0})), ConfigError);
    const auto names = registered_systems();
    for (const char* n : {"linear_scalar", "linear_diagonal", "harmonic", "bistable", "duffing", "duffing_undamped",
                          "controlled_bistable"})
      CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }

  TEST_CASE("flow of x' = -x matches exp(-t)") {
    const auto sys = make_system("linear_scalar");
    const auto r = flow(sys, vec({1.0}), 1.0, 1e-10);
    CHECK_FALSE(r.escaped);
    CHECK(r.state[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK(flow(sys, vec({0.7}), 0.0, 1e-10).state[0] == 0.7);
    // backward integration
    CHECK(flow(sys, vec({1.0}), -1.0, 1e-10).state[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
  }

  TEST_CASE("bistable flow against the closed-form solution") {
    const auto sys = make_system("bistable");
    for (double x0 : {0.5, -0.3, 1.7, -1.9})
      for (double t : {0.3, 1.0, 10.0})
        CHECK(flow(sys, vec({x0}), t, 1e-10).state[0] == doctest::Approx(testing::bistable_solution(x0, t)).epsilon(1e-8));
    CHECK(std::abs(flow(sys, vec({0.5}), 10.0, 1e-10).state[0] - 1.0) <= 1e-4);
  }

  TEST_CASE("semigroup property") {
    const auto sys = make_system("duffing", {{"delta", 0.5}});
    Rng rng(3);
    const double tol = 1e-10;
    for (int k = 0; k < 20; ++k) {
      const Vector x = uniform_in_box(rng, testing::box2(-2, 2));
      const double s = uniform01(rng), t = uniform01(rng);
      const Vector a = flow(sys, flow(sys, x, s, tol).state, t, tol).state;
      const Vector b = flow(sys, x, s + t, tol).state;
      CHECK((a - b).norm() <= 10 * tol * (1 + b.norm()) * 10);
    }
  }

  TEST_CASE("finite escape is reported, not thrown") {
    // x' = x - x^3 backward from 2 blows up in finite time
    const auto r = flow(make_system("bistable"), vec({2.0}), -5.0, 1e-10);
    CHECK(r.escaped);
  }

  TEST_CASE("fixed points and their classes") {
    const auto b = find_fixed_points(make_system("bistable"), {vec({-2.0}), vec({0.1}), vec({2.0})}, 1e-12).points;
    REQUIRE(b.size() == 3);
    CHECK(b[0].location[0] == doctest::Approx(-1.0));
    CHECK(b[1].location[0] == doctest::Approx(0.0));
    CHECK(b[2].location[0] == doctest::Approx(1.0));
    CHECK(b[0].stability == Stability::stable);
    CHECK(b[1].stability == Stability::unstable);
    CHECK(b[2].stability == Stability::stable);
    for (const auto& fp : b) CHECK(fp.residual_norm <= 1e-12);

    const auto d = find_fixed_points(make_system("duffing", {{"delta", 0.5}}), grid_points(testing::box2(-2, 2), {9, 9}),
                                     1e-12).points;
    REQUIRE(d.size() == 3);
    for (const auto& fp : d) {
      if (std::abs(fp.location[0]) < 1e-9) {
        CHECK(fp.stability == Stability::saddle);
        // mu^2 + 0.5 mu - 1 = 0
        const double mu = (-0.5 + std::sqrt(0.25 + 4.0)) / 2.0;
        double top = -1e9;
        for (auto e : fp.jacobian_eigenvalues) top = std::max(top, e.real());
        CHECK(top == doctest::Approx(mu));
      } else {
        CHECK(std::abs(std::abs(fp.location[0]) - 1.0) < 1e-9);
        CHECK(fp.stability == Stability::stable);
      }
    }
    const auto l = find_fixed_points(make_system("linear_scalar"), {vec({1.0})}, 1e-12).points;
    REQUIRE(l.size() == 1);
    CHECK(l[0].stability == Stability::stable);
    // harmonic oscillator: centre
    const auto h = find_fixed_points(make_system("harmonic"), {vec({0.3, 0.2})}, 1e-12).points;
    REQUIRE(h.size() == 1);
    CHECK(h[0].stability == Stability::non_hyperbolic);
  }

  TEST_CASE("basin labels") {
    const auto sys = make_system("bistable");
    const auto fps = find_fixed_points(sys, grid_points(testing::box1(-2, 2), {41}), 1e-12).points;
    REQUIRE(fps.size() == 3);
    auto label = [&](double x) { return classify_basin(sys, vec({x}), fps, 50.0, 1e-2, 1e-10); };
    CHECK(*label(0.5).fixed_point == 2);
    CHECK(*label(-0.5).fixed_point == 0);
    CHECK(*label(0.0).fixed_point == 1);
    const auto grid = compute_basin_grid(sys, grid_points(testing::box1(-2, 2), {41}), fps, 50.0, 1e-2, 1e-10);
    REQUIRE(grid.labels.size() == grid.points.size());
    // flow invariance of labels
    for (std::size_t k = 0; k < grid.points.size(); ++k) {
      if (!grid.labels[k].resolved()) continue;
      const auto moved = flow(sys, grid.points[k], 1.0, 1e-10).state;
      CHECK(classify_basin(sys, moved, fps, 50.0, 1e-2, 1e-10) == grid.labels[k]);
    }
  }

  TEST_CASE("snapshot pairs") {
    const auto sys = make_system("bistable");
    const auto p = sample_snapshot_pairs(sys, testing::box1(-2, 2), 100, 0.1, 5, 1e-10);
    REQUIRE(p.size() == 100);
    CHECK(p.dt == 0.1);
    for (std::size_t k = 0; k < p.size(); ++k)
      CHECK(std::abs(p.y[k][0] - testing::bistable_solution(p.x[k][0], 0.1)) <= 1e-8);
    const auto q = sample_snapshot_pairs(sys, testing::box1(-2, 2), 100, 0.1, 5, 1e-10);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.x[k] == q.x[k]);
  }

  TEST_CASE("trajectory csv header and rows") {
    const auto traj = sample_trajectory(make_system("harmonic"), vec({1.0, 0.0}), {0.0, 0.5, 1.0}, 1e-10);
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    const auto text = os.str();
    CHECK(text.rfind("t,x1,x2\n0,1,0\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK_THROWS_AS(sample_trajectory(make_system("harmonic"), vec({1.0, 0.0}), {0.0, 1.0, 0.5}, 1e-10), ConfigError);
  }
}
