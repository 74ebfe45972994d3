#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "helpers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "koopcheck");
  std::ostringstream out, err;
  const int code = koopcheck::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct Workdir {
  fs::path dir;
  std::string config;
  std::string out;
  explicit Workdir(const std::string& name, const json& cfg = testing::small_config())
      : dir(testing::scratch_dir(name)), config(testing::write_config(dir, cfg)), out((dir / "out").string()) {}
  Result run(std::vector<std::string> verb) const {
    std::vector<std::string> args{"--config", config, "--out", out};
    args.insert(args.end(), verb.begin(), verb.end());
    return invoke(args);
  }
};

std::string first_line(const std::string& text, std::size_t skip = 0) {
  std::istringstream is(text);
  std::string line;
  for (std::size_t k = 0; k <= skip; ++k) std::getline(is, line);
  return line;
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 2 with a structured message") {
    const auto none = invoke({});
    CHECK(none.code == koopcheck::cli::kConfigError);
    const auto bad = invoke({"frobnicate"});
    CHECK(bad.code == 2);
    const auto j = json::parse(bad.err);
    CHECK(j["error"]["kind"] == "usage");
    CHECK(j["error"]["exit_code"] == 2);
    CHECK(invoke({"--help"}).code == 0);
  }

  TEST_CASE("config errors exit 2") {
    auto cfg = testing::small_config();
    cfg["unexpected"] = true;
    Workdir w("cli_config_error", cfg);
    const auto r = w.run({"verify"});
    CHECK(r.code == 2);
    CHECK(json::parse(r.err)["error"]["kind"] == "config");
    CHECK(invoke({"--config", "/nonexistent/koopcheck.json", "verify"}).code == 2);
  }

  TEST_CASE("simulate writes a hashed csv") {
    Workdir w("cli_simulate");
    const auto r = w.run({"simulate", "--system", "bistable", "--x0", "0.5", "--t", "1", "--samples", "11"});
    REQUIRE(r.code == 0);
    const auto text = testing::read_file(fs::path(w.out) / "trajectory_bistable.csv");
    CHECK(first_line(text).rfind("# config_hash=", 0) == 0);
    CHECK(first_line(text, 1) == "t,x1");
    CHECK(line_count(text) == 13);
    CHECK(w.run({"simulate", "--system", "bistable", "--x0", "0.5", "0.1", "--t", "1"}).code == 2);
    CHECK(w.run({"simulate", "--system", "nope", "--x0", "0.5", "--t", "1"}).code == 2);
    CHECK(w.run({"simulate", "--system", "bistable", "--x0", "0.5", "--t", "-0.5"}).code == 0);
  }

  TEST_CASE("verify exit codes follow the verdicts") {
    Workdir ok("cli_verify_ok");
    const auto r = ok.run({"--json", "verify"});
    CHECK(r.code == 0);
    const auto summary = json::parse(r.out);
    CHECK(summary["config_hash"].is_string());
    const auto doc = json::parse(testing::read_file(fs::path(ok.out) / "report.json"));
    CHECK(doc["aggregate_verdict"] == "supported");
    CHECK(doc["reports"].size() == 8);

    auto cfg = testing::small_config();
    cfg["checks"]["theorem2"]["threshold"] = 1e9;
    Workdir bad("cli_verify_bad", cfg);
    CHECK(bad.run({"verify", "--only", "theorem2"}).code == 1);
    const auto csv = testing::read_file(fs::path(bad.out) / "counterexamples" / "theorem2.csv");
    CHECK(first_line(csv).rfind("# config_hash=", 0) == 0);
    CHECK(ok.run({"verify", "--only", "theorem99"}).code == 2);
  }

  TEST_CASE("fit then grid") {
    Workdir w("cli_grid");
    const auto f = w.run({"fit"});
    REQUIRE(f.code == 0);
    CHECK(f.out.find("fit,pair,re_lambda,im_lambda,abs_lambda_d,residual") != std::string::npos);
    const auto model = fs::path(w.out) / "models" / "fit.json";
    REQUIRE(fs::exists(model));
    const auto first = testing::read_file(model);
    REQUIRE(w.run({"fit"}).code == 0);
    CHECK(testing::read_file(model) == first);

    REQUIRE(w.run({"grid", "--fit", "fit", "--pair", "1", "--resolution", "5"}).code == 0);
    const auto csv = testing::read_file(fs::path(w.out) / "grid_fit_pair1.csv");
    CHECK(first_line(csv, 1) == "x1,re_phi,im_phi,abs_phi,extrapolated");
    CHECK(line_count(csv) == 7);

    REQUIRE(w.run({"grid", "--model", model.string(), "--pair", "0", "--resolution", "1", "--region", "3", "3"}).code ==
            0);
    const auto one = testing::read_file(fs::path(w.out) / "grid_fit_pair0.csv");
    CHECK(line_count(one) == 3);
    // 3 lies outside the training region
    CHECK(first_line(one, 2).substr(first_line(one, 2).rfind(',') + 1) == "1");

    REQUIRE(w.run({"grid", "--fit", "fit", "--pair", "0", "--resolution", "3", "--region", "-1", "1"}).code == 0);
    const auto inside = testing::read_file(fs::path(w.out) / "grid_fit_pair0.csv");
    CHECK(inside.find(",1\n") == std::string::npos);

    CHECK(w.run({"grid", "--fit", "fit", "--pair", "999"}).code == 2);
    CHECK(w.run({"grid", "--fit", "absent", "--pair", "0"}).code == 2);
    CHECK(w.run({"grid", "--fit", "fit", "--pair", "0", "--resolution", "0"}).code == 2);
  }

  TEST_CASE("control") {
    Workdir w("cli_control");
    const auto r = w.run({"control"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(testing::read_file(fs::path(w.out) / "control_report.json"));
    REQUIRE(doc["scenarios"].size() == 2);
    CHECK(doc["scenarios"][0]["crossed"] == true);
    CHECK(doc["scenarios"][0]["certificate"]["holds"] == true);
    CHECK(doc["scenarios"][1]["crossed"] == false);
    CHECK_FALSE(doc["scenarios"][1].contains("t_c"));
    CHECK(fs::exists(fs::path(w.out) / "control_crossing.csv"));

    auto cfg = testing::small_config();
    cfg["control"]["scenarios"][0]["schedule"] = {{"kind", "constant"}};
    Workdir bad("cli_control_bad", cfg);
    CHECK(bad.run({"control"}).code == 2);
  }

  TEST_CASE("seed override changes the hash") {
    Workdir w("cli_seed");
    const auto a = json::parse(w.run({"--json", "simulate", "--system", "bistable", "--x0", "0.5", "--t", "1"}).out);
    const auto b = json::parse(
        w.run({"--json", "--seed", "99", "simulate", "--system", "bistable", "--x0", "0.5", "--t", "1"}).out);
    CHECK(a["config_hash"] != b["config_hash"]);
  }
}
