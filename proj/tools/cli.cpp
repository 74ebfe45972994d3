#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "koopcheck/config.hpp"
#include "koopcheck/model_io.hpp"
#include "koopcheck/report.hpp"
#include "koopcheck/suite.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config = "configs/default.json";
  std::string out;
  std::optional<std::uint64_t> seed;
  bool json = false;

  // simulate
  std::string system;
  std::vector<double> x0;
  double t = 1.0;
  std::size_t samples = 101;

  // verify / fit
  std::string only;

  // grid
  std::string model;
  std::string fit;
  std::size_t pair = 0;
  std::vector<double> region;
  std::vector<int> resolution{101};
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_line(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

struct Loaded {
  ExperimentConfig config;
  std::string out_dir;
};

Loaded load(const Options& o) {
  Loaded l{ExperimentConfig::load(o.config), {}};
  if (o.seed) l.config.override_seed(*o.seed);
  l.out_dir = o.out.empty() ? l.config.output_dir : o.out;
  return l;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// ---------------------------------------------------------------------------

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto l = load(o);
  Workspace ws(l.config);
  if (o.system.empty()) throw ConfigError("simulate needs --system");
  const auto& sys = ws.system(o.system);
  if (o.x0.size() != sys.dimension())
    throw ConfigError("--x0 needs " + std::to_string(sys.dimension()) + " values");
  if (!std::isfinite(o.t) || o.t == 0.0) throw ConfigError("--t must be finite and nonzero");
  if (o.samples < 2) throw ConfigError("--samples must be at least 2");
  std::vector<double> times(o.samples);
  for (std::size_t k = 0; k < o.samples; ++k)
    times[k] = o.t * static_cast<double>(k) / static_cast<double>(o.samples - 1);
  const Vector x0 = Eigen::Map<const Vector>(o.x0.data(), static_cast<Eigen::Index>(o.x0.size()));
  // controlled systems are simulated with u = 0
  const auto traj = sample_trajectory(sys, x0, times, l.config.integrator_tolerance);
  std::ostringstream csv;
  csv << hash_line(l.config.hash());
  write_trajectory_csv(csv, traj);
  const auto path = path_in(l.out_dir, "trajectory_" + o.system + ".csv");
  write_file_atomic(path, csv.str());
  if (o.json) {
    Json j{{"command", "simulate"}, {"config_hash", l.config.hash()}, {"path", path},
           {"samples", traj.states.size()}, {"escaped", traj.escaped}};
    out << j.dump() << "\n";
  } else {
    out << "config_hash " << l.config.hash() << "\n"
        << "wrote " << traj.states.size() << " samples to " << path << (traj.escaped ? " (escaped)" : "") << "\n";
  }
  return kOk;
}

int cmd_fit(const Options& o, std::ostream& out) {
  const auto l = load(o);
  Workspace ws(l.config);
  std::vector<std::string> ids;
  if (!o.only.empty()) {
    (void)l.config.fit(o.only);
    ids.push_back(o.only);
  } else {
    for (const auto& f : l.config.fits) ids.push_back(f.id);
  }
  if (ids.empty()) throw ConfigError("config has no fits");
  Json summary{{"command", "fit"}, {"config_hash", l.config.hash()}, {"fits", Json::array()}};
  if (!o.json) {
    out << "config_hash " << l.config.hash() << "\n";
    out << "fit,pair,re_lambda,im_lambda,abs_lambda_d,residual\n";
  }
  for (const auto& id : ids) {
    const auto& fm = ws.fit(id);
    const auto artifact = make_artifact(fm, l.config.system(l.config.fit(id).system).name, l.config.hash());
    const auto path = path_in(l.out_dir, "models/" + id + ".json");
    save_model(path, artifact);
    Json fj{{"id", id},
            {"model_path", path},
            {"method", fm.method},
            {"residual", fm.residual()},
            {"holdout_residual", fm.holdout_residual},
            {"gamma", artifact.gamma},
            {"default_ridge", artifact.default_ridge},
            {"defective", fm.eigen.defective},
            {"eigenvalues", Json::array()}};
    for (std::size_t k = 0; k < fm.eigen.pairs.size(); ++k) {
      const auto& p = fm.eigen.pairs[k];
      const double ad = p.lambda_discrete ? std::abs(*p.lambda_discrete) : std::exp(p.lambda.real());
      fj["eigenvalues"].push_back({{"re", p.lambda.real()}, {"im", p.lambda.imag()}, {"abs_lambda_d", ad}});
      if (!o.json)
        out << id << ',' << k << ',' << fmt(p.lambda.real()) << ',' << fmt(p.lambda.imag()) << ',' << fmt(ad) << ','
            << fmt(fm.residual()) << "\n";
    }
    summary["fits"].push_back(std::move(fj));
  }
  if (o.json) out << summary.dump() << "\n";
  return kOk;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const auto l = load(o);
  std::optional<std::string> only;
  if (!o.only.empty()) only = o.only;
  const auto reports = run_all_checks(l.config, only);
  const auto doc = report_document(reports, l.config.hash(), l.config.seed);
  const auto path = path_in(l.out_dir, "report.json");
  write_file_atomic(path, doc.dump(2) + "\n");
  for (const auto& r : reports) {
    if (r.counterexamples.empty()) continue;
    std::ostringstream csv;
    csv << hash_line(l.config.hash());
    write_counterexamples_csv(csv, r);
    write_file_atomic(path_in(l.out_dir, "counterexamples/" + r.theorem_id + ".csv"), csv.str());
  }
  const auto verdict = aggregate_verdict(reports);
  if (o.json) {
    Json j{{"command", "verify"}, {"config_hash", l.config.hash()}, {"report_path", path},
           {"aggregate_verdict", to_string(verdict)}, {"verdicts", Json::object()}};
    for (const auto& r : reports) j["verdicts"][r.theorem_id] = to_string(r.verdict);
    out << j.dump() << "\n";
  } else {
    out << "config_hash " << l.config.hash() << "\n";
    for (const auto& r : reports) {
      out << r.theorem_id << ": " << to_string(r.verdict);
      if (r.counterexample_count) out << " (" << r.counterexample_count << " counterexamples)";
      out << "\n";
      for (const auto& n : r.notes) out << "    " << n << "\n";
    }
    out << "aggregate: " << to_string(verdict) << "\n";
  }
  return verdict == Verdict::violated ? kViolation : kOk;
}

int cmd_grid(const Options& o, std::ostream& out) {
  std::string model_path = o.model;
  std::string out_dir = o.out;
  if (model_path.empty()) {
    if (o.fit.empty()) throw ConfigError("grid needs --model PATH or --fit ID");
    const auto l = load(o);
    (void)l.config.fit(o.fit);
    model_path = path_in(l.out_dir, "models/" + o.fit + ".json");
    if (!fs::exists(model_path)) throw ConfigError("no model artifact at '" + model_path + "'; run fit first");
    out_dir = l.out_dir;
  }
  if (out_dir.empty()) out_dir = fs::path(model_path).parent_path().string();
  const auto m = load_model(model_path);
  if (o.pair >= m.pairs.size())
    throw ConfigError("unknown pair id " + std::to_string(o.pair) + " (model has " + std::to_string(m.pairs.size()) +
                      " pairs)");
  const auto d = static_cast<std::size_t>(m.dictionary->dimension());
  Box box = m.region;
  if (!o.region.empty()) {
    if (o.region.size() != 2 * d) throw ConfigError("--region needs lower,upper per axis");
    Vector lo(static_cast<Eigen::Index>(d)), hi(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) {
      lo[static_cast<Eigen::Index>(j)] = o.region[2 * j];
      hi[static_cast<Eigen::Index>(j)] = o.region[2 * j + 1];
    }
    if (!(lo.array() <= hi.array()).all()) throw ConfigError("--region has lower > upper");
    box = Box(lo, hi);
  }
  std::vector<int> res = o.resolution;
  if (res.size() == 1) res.assign(d, res.front());
  if (res.size() != d) throw ConfigError("--resolution needs 1 or " + std::to_string(d) + " values");
  for (int n : res)
    if (n < 1) throw ConfigError("--resolution must be positive");
  const auto& pair = m.pairs[o.pair];
  std::ostringstream csv;
  csv << hash_line(m.config_hash);
  for (std::size_t j = 0; j < d; ++j) csv << 'x' << (j + 1) << ',';
  csv << "re_phi,im_phi,abs_phi,extrapolated\n";
  std::size_t extrapolated = 0, rows = 0;
  for (const auto& x : grid_points(box, res)) {
    const Complex v = eval_eigenfunction(pair, *m.dictionary, x);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericalError("eigenfunction is not finite on the grid");
    const bool outside = !m.in_training_region(x);
    extrapolated += outside ? 1 : 0;
    for (Eigen::Index j = 0; j < x.size(); ++j) csv << fmt(x[j]) << ',';
    csv << fmt(v.real()) << ',' << fmt(v.imag()) << ',' << fmt(std::abs(v)) << ',' << (outside ? 1 : 0) << "\n";
    ++rows;
  }
  const auto path = path_in(out_dir, "grid_" + m.fit_id + "_pair" + std::to_string(o.pair) + ".csv");
  write_file_atomic(path, csv.str());
  if (o.json) {
    Json j{{"command", "grid"},   {"config_hash", m.config_hash}, {"path", path},
           {"rows", rows},        {"extrapolated_rows", extrapolated},
           {"lambda", {{"re", pair.lambda.real()}, {"im", pair.lambda.imag()}}}};
    out << j.dump() << "\n";
  } else {
    out << "config_hash " << m.config_hash << "\n"
        << "pair " << o.pair << " lambda " << fmt(pair.lambda.real()) << (pair.lambda.imag() < 0 ? "" : "+")
        << fmt(pair.lambda.imag()) << "i\n"
        << "wrote " << rows << " rows (" << extrapolated << " extrapolated) to " << path << "\n";
  }
  return kOk;
}

int cmd_control(const Options& o, std::ostream& out) {
  const auto l = load(o);
  Workspace ws(l.config);
  const auto run = run_control(ws);
  Json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["config_hash"] = l.config.hash();
  doc["seed"] = l.config.seed;
  auto eig = Json::array();
  for (Eigen::Index i = 0; i < run.decomposition.D.size(); ++i)
    eig.push_back({{"re", run.decomposition.D[i].real()}, {"im", run.decomposition.D[i].imag()}});
  doc["model"] = {{"residual", run.model.residual},
                  {"gamma", run.model.gamma},
                  {"default_ridge", run.model.default_ridge},
                  {"state_dictionary_size", run.model.state_dictionary->size()},
                  {"control_dictionary", run.model.control_dictionary->to_json()},
                  {"eigenvalues", std::move(eig)},
                  {"null_rows", run.decomposition.null_rows},
                  {"condition_number", run.decomposition.condition_number},
                  {"reconstruction_error", run.decomposition.reconstruction_error}};
  doc["scenarios"] = Json::array();
  bool all_hold = true;
  for (const auto& r : run.reports) {
    doc["scenarios"].push_back(r.to_json());
    all_hold = all_hold && r.certified;
    std::ostringstream csv;
    csv << hash_line(l.config.hash());
    write_crossing_csv(csv, r);
    write_file_atomic(path_in(l.out_dir, "control_" + r.scenario + ".csv"), csv.str());
  }
  const auto path = path_in(l.out_dir, "control_report.json");
  write_file_atomic(path, doc.dump(2) + "\n");
  if (o.json) {
    Json j{{"command", "control"}, {"config_hash", l.config.hash()}, {"report_path", path}, {"scenarios", Json::array()}};
    for (const auto& r : run.reports) {
      Json s{{"id", r.scenario}, {"crossed", r.crossing_time.has_value()}, {"certificate_holds", r.certified}};
      if (r.crossing_time) s["t_c"] = *r.crossing_time;
      j["scenarios"].push_back(std::move(s));
    }
    out << j.dump() << "\n";
  } else {
    out << "config_hash " << l.config.hash() << "\n";
    for (const auto& r : run.reports) {
      out << r.scenario << ": ";
      if (r.crossing_time)
        out << "t_c = " << fmt(*r.crossing_time) << ", null change " << fmt(r.null_change_at_crossing)
            << " <= certified " << fmt(r.certified_change_at_crossing)
            << (r.certified ? "" : " (FAILED)") << ", indicator error at t_c "
            << fmt(r.indicator_error_at_crossing.value_or(0.0)) << "\n";
      else
        out << "no basin crossing within " << fmt(r.horizon) << "\n";
    }
    out << "wrote " << path << "\n";
  }
  return all_hold ? kOk : kViolation;
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  Json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Koopman eigenfunction analysis and theorem checks", "koopcheck"};
  app.fallthrough();
  app.require_subcommand(1, 1);
  app.add_option("--config", o.config, "experiment config (JSON)");
  app.add_option("--out", o.out, "output directory (overrides the config)");
  app.add_option("--seed", o.seed, "master seed (overrides the config)");
  app.add_flag("--json", o.json, "machine-readable summary on stdout");

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory to CSV");
  sim->add_option("--system", o.system, "system block id")->required();
  sim->add_option("--x0", o.x0, "initial state")->required()->allow_extra_args()->expected(1, -1);
  sim->add_option("--t", o.t, "final time; negative integrates backward")->required();
  sim->add_option("--samples", o.samples, "output samples including t = 0");

  auto* fit = app.add_subcommand("fit", "fit models and write artifacts");
  fit->add_option("--only", o.only, "single fit id");

  auto* verify = app.add_subcommand("verify", "run the theorem suite");
  verify->add_option("--only", o.only, "single check id");

  auto* grid = app.add_subcommand("grid", "tabulate one eigenfunction on a grid");
  grid->add_option("--model", o.model, "model artifact path");
  grid->add_option("--fit", o.fit, "fit id, read from <out>/models/<id>.json");
  grid->add_option("--pair", o.pair, "eigenpair index");
  grid->add_option("--region", o.region, "lower,upper per axis")->expected(2, -1);
  grid->add_option("--resolution", o.resolution, "nodes per axis")->expected(1, -1);

  auto* control = app.add_subcommand("control", "run the lifted control experiment");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what(), kConfigError);
    return kConfigError;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out);
    if (fit->parsed()) return cmd_fit(o, out);
    if (verify->parsed()) return cmd_verify(o, out);
    if (grid->parsed()) return cmd_grid(o, out);
    if (control->parsed()) return cmd_control(o, out);
  } catch (const ConfigError& e) {
    report_error(err, "config", e.what(), kConfigError);
    return kConfigError;
  } catch (const std::exception& e) {
    report_error(err, "runtime", e.what(), kRuntimeError);
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace koopcheck::cli
