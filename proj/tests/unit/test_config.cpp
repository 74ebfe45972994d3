#include <doctest.h>

#include "helpers.hpp"
#include "koopcheck/config.hpp"

using namespace koopcheck;
using nlohmann::json;

namespace {

json with(json base, const json::json_pointer& at, json value) {
  base[at] = std::move(value);
  return base;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("the shipped default config parses") {
    const auto cfg = ExperimentConfig::load(testing::source_path("configs/default.json"));
    CHECK(cfg.schema_version == 1);
    CHECK(cfg.seed == 20240611u);
    CHECK(cfg.systems.size() >= 6);
    CHECK(cfg.system("duffing").parameters.at("delta") == 0.5);
    CHECK(cfg.dictionary("rbf_duffing").kind == "rbf");
    CHECK(cfg.fit("bistable_edmd").dt == 0.1);
    CHECK(cfg.checks.lemma1.has_value());
    CHECK(cfg.control.has_value());
    CHECK_THROWS_AS(cfg.system("nope"), ConfigError);
    CHECK_THROWS_AS(cfg.fit("nope"), ConfigError);
  }

  TEST_CASE("defaults") {
    const auto cfg = ExperimentConfig::parse(testing::small_config());
    CHECK(cfg.output_dir == "out");
    CHECK(cfg.integrator_tolerance == 1e-10);
    CHECK(cfg.checks.theorem3->tol == 0.01);
    CHECK(cfg.checks.theorem3->dense_resolution == 1001);
    CHECK_FALSE(cfg.checks.theorem4.has_value());
    CHECK(cfg.control->null_threshold == 1e-6);
  }

  TEST_CASE("structural errors") {
    const json base = testing::small_config();
    auto rejects = [](const json& j) { CHECK_THROWS_AS(ExperimentConfig::parse(j), ConfigError); };
    rejects(with(base, "/bogus"_json_pointer, 1));
    rejects(with(base, "/schema_version"_json_pointer, 2));
    rejects(with(base, "/seed"_json_pointer, "seven"));
    rejects(with(base, "/seed"_json_pointer, -1));
    rejects(with(base, "/systems/0/regon"_json_pointer, 1));
    rejects(with(base, "/systems/0/region/lower"_json_pointer, json::array({3})));
    rejects(with(base, "/dictionaries/0/max_degree"_json_pointer, 0));
    rejects(with(base, "/dictionaries/0/kind"_json_pointer, "fourier"));
    rejects(with(base, "/fits/0/dt"_json_pointer, -0.1));
    rejects(with(base, "/fits/0/method"_json_pointer, "dmd"));
    rejects(with(base, "/checks/theorem3/starts"_json_pointer, 1.5));
    rejects(with(base, "/checks/theorem9"_json_pointer, json::object()));
    rejects(with(base, "/control/scenarios/0/schedule/kind"_json_pointer, "ramp"));
    json dup = base;
    dup["systems"].push_back(dup["systems"][0]);
    rejects(dup);
    json no_seed = base;
    no_seed.erase("seed");
    rejects(no_seed);
    rejects(json::array());
  }

  TEST_CASE("load errors") {
    const auto dir = testing::scratch_dir("config_load");
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "missing.json").string()), ConfigError);
    std::ofstream(dir / "broken.json") << "{ \"seed\": ";
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "broken.json").string()), ConfigError);
  }

  TEST_CASE("hash and seed override") {
    auto a = ExperimentConfig::parse(testing::small_config());
    const auto b = ExperimentConfig::parse(testing::small_config());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    // key order does not matter
    const auto reordered = ExperimentConfig::parse(json::parse(testing::small_config().dump()));
    CHECK(reordered.hash() == a.hash());
    a.override_seed(8);
    CHECK(a.seed == 8u);
    CHECK(a.source["seed"] == 8);
    CHECK(a.hash() != b.hash());
    CHECK(ExperimentConfig::parse(with(testing::small_config(), "/fits/0/samples"_json_pointer, 401)).hash() !=
          b.hash());
  }
}
