#include <doctest.h>

#include "helpers.hpp"
#include "koopcheck/oracles.hpp"
#include "koopcheck/systems.hpp"

using namespace koopcheck;
using testing::vec;

TEST_SUITE("oracles") {
  TEST_CASE("bistable closed forms") {
    const auto up = bistable_unstable_oracle();
    const auto down = bistable_stable_oracle();
    CHECK(up.lambda == Complex(1.0, 0.0));
    CHECK(down.lambda == Complex(-2.0, 0.0));
    CHECK(up.expression_id == "x/sqrt|1-x^2|");
    CHECK(down.expression_id == "(1-x^2)/x^2");
    CHECK(up.phi(vec({0.9}))->real() == doctest::Approx(2.064742).epsilon(1e-6));
    CHECK(up.phi(vec({0.0}))->real() == 0.0);
    CHECK(up.phi(vec({-0.5}))->real() == doctest::Approx(-0.5 / std::sqrt(0.75)));
    CHECK(down.phi(vec({0.5}))->real() == doctest::Approx(3.0));
    CHECK_FALSE(up.phi(vec({1.0})));
    CHECK_FALSE(down.phi(vec({0.0})));
    CHECK_FALSE(up.defined_at(vec({-1.0})));
    CHECK(up.singular_distance(vec({0.9})) == doctest::Approx(0.1));
    CHECK(down.singular_distance(vec({-0.3})) == doctest::Approx(0.3));
  }

  TEST_CASE("bistable oracles evolve exactly along the flow") {
    const auto sys = make_system("bistable");
    for (const auto& o : {bistable_unstable_oracle(), bistable_stable_oracle()}) {
      for (double x0 : {0.2, 0.5, -0.7, 1.4}) {
        for (double t : {0.1, 0.5}) {
          const double xt = testing::bistable_solution(x0, t);
          const Complex lhs = *o.phi(vec({xt}));
          const Complex rhs = std::exp(o.lambda * t) * *o.phi(vec({x0}));
          CHECK(std::abs(lhs - rhs) <= 1e-10 * (1 + std::abs(rhs)));
        }
      }
    }
  }

  TEST_CASE("validation accepts true oracles and rejects wrong ones") {
    const auto sys = make_system("bistable");
    const auto good = validate_oracle(bistable_unstable_oracle(), sys, testing::box1(-2, 2), 1000, 1);
    CHECK(good.passed);
    CHECK(good.points == 1000);
    CHECK(good.max_error <= kOracleValidationTol);
    auto wrong = bistable_stable_oracle();
    wrong.lambda = Complex(-1.0, 0.0);
    CHECK_FALSE(validate_oracle(wrong, sys, testing::box1(-2, 2), 200, 1).passed);
    // right function, wrong system
    CHECK_FALSE(validate_oracle(bistable_unstable_oracle(), make_system("linear_scalar"), testing::box1(-2, 2), 200, 1)
                    .passed);
  }

  TEST_CASE("linear oracles") {
    const auto sys = make_system("linear_diagonal");
    const auto os = linear_oracles(sys);
    REQUIRE(os.size() == 2);
    std::vector<double> rates;
    for (const auto& o : os) {
      rates.push_back(o.lambda.real());
      CHECK(validate_oracle(o, sys, testing::box2(-2, 2), 500, 3).passed);
      CHECK(std::isinf(o.singular_distance(vec({0.0, 0.0}))));
    }
    std::sort(rates.begin(), rates.end());
    CHECK(rates[0] == doctest::Approx(-2.0));
    CHECK(rates[1] == doctest::Approx(-1.0));

    const auto h = linear_oracles(make_system("harmonic"));
    REQUIRE(h.size() == 2);
    for (const auto& o : h) CHECK(std::abs(std::abs(o.lambda.imag()) - 1.0) <= 1e-12);
    CHECK(h[0].expression_id.rfind("<w", 0) == 0);
    CHECK_THROWS(linear_oracles(make_system("bistable")));
  }

  TEST_CASE("registry") {
    CHECK(oracles_for(make_system("bistable")).size() == 2);
    CHECK(oracles_for(make_system("duffing")).empty());
    CHECK(oracles_for(make_system("linear_scalar")).size() == 1);
    const auto p = bistable_stable_oracle().as_eigenpair();
    CHECK(p.source == EigenSource::analytic_oracle);
    CHECK(p.normalization == 1.0);
    CHECK(evaluate(p, vec({0.5}))->real() == doctest::Approx(3.0));
  }
}
