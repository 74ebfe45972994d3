#include <doctest.h>

#include "helpers.hpp"
#include "koopcheck/suite.hpp"

using namespace koopcheck;

TEST_SUITE("suite") {
  TEST_CASE("one report per registered check, in order") {
    const auto cfg = ExperimentConfig::parse(testing::small_config());
    const auto reports = run_all_checks(cfg);
    REQUIRE(reports.size() == registered_checks().size());
    REQUIRE(registered_checks().size() == 8);
    for (std::size_t k = 0; k < reports.size(); ++k) CHECK(reports[k].theorem_id == registered_checks()[k]);
    auto by_id = [&](const std::string& id) {
      return *std::find_if(reports.begin(), reports.end(), [&](const auto& r) { return r.theorem_id == id; });
    };
    CHECK(by_id("lemma1").verdict == Verdict::supported);
    CHECK(by_id("theorem2").verdict == Verdict::supported);
    CHECK(by_id("theorem3").verdict == Verdict::supported);
    CHECK(by_id("exit_theorem").verdict == Verdict::supported);
    // blocks absent from the config
    CHECK(by_id("theorem4").verdict == Verdict::inconclusive);
    CHECK(by_id("theorem8").verdict == Verdict::inconclusive);
  }

  TEST_CASE("only and unknown ids") {
    const auto cfg = ExperimentConfig::parse(testing::small_config());
    const auto one = run_all_checks(cfg, std::string("theorem2"));
    REQUIRE(one.size() == 1);
    CHECK(one[0].theorem_id == "theorem2");
    CHECK_THROWS_AS(run_all_checks(cfg, std::string("theorem99")), ConfigError);
  }

  TEST_CASE("errors inside a check become inconclusive reports") {
    auto j = testing::small_config();
    j["checks"]["theorem2"]["system"] = "missing";
    const auto cfg = ExperimentConfig::parse(j);
    const auto r = run_all_checks(cfg, std::string("theorem2"));
    REQUIRE(r.size() == 1);
    CHECK(r[0].verdict == Verdict::inconclusive);
    bool mentions = false;
    for (const auto& n : r[0].notes) mentions = mentions || n.find("missing") != std::string::npos;
    CHECK(mentions);
  }

  TEST_CASE("runs are deterministic") {
    const auto cfg = ExperimentConfig::parse(testing::small_config());
    const auto a = report_document(run_all_checks(cfg), cfg.hash(), cfg.seed).dump();
    const auto b = report_document(run_all_checks(cfg), cfg.hash(), cfg.seed).dump();
    CHECK(a == b);
  }

  TEST_CASE("workspace fits and control run") {
    const auto cfg = ExperimentConfig::parse(testing::small_config());
    Workspace ws(cfg);
    const auto& fit = ws.fit("fit");
    CHECK(fit.discrete.has_value());
    CHECK(fit.holdout_states.size() == 100);
    CHECK(fit.eigen.pairs.size() == fit.dictionary()->size());
    CHECK(&ws.fit("fit") == &fit);
    CHECK(ws.fixed_points("bistable").size() == 3);
    CHECK_THROWS_AS(ws.fit("nope"), ConfigError);

    const auto run = run_control(ws);
    REQUIRE(run.reports.size() == 2);
    CHECK(run.reports[0].scenario == "crossing");
    CHECK(run.reports[0].crossing_time.has_value());
    CHECK(run.reports[0].certified);
    CHECK_FALSE(run.reports[1].crossing_time.has_value());
    CHECK(run.input_bound.bound > 0.0);
  }
}
