// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Expected values come from closed forms and quadrature computed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "koopcheck/checks.hpp"
#include "koopcheck/oracles.hpp"
#include "koopcheck/suite.hpp"

using namespace koopcheck;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& id, const std::string& title, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  char t[32];
  std::snprintf(t, sizeof t, "%.1fs", secs);
  std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << title << ": " << o.detail << " (" << t << ")"
            << std::endl;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Vector vec1(double x) { return Vector::Constant(1, x); }

double real_phi(const AnalyticOracle& o, double x) { return o.phi(vec1(x))->real(); }

// Composite Gauss-Legendre (5 nodes) on n panels.
double integrate(const std::function<double(double)>& f, double a, double b, int n) {
  static const double xs[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                               0.9061798459386640};
  static const double ws[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                               0.2369268850561891};
  const double h = (b - a) / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = a + (i + 0.5) * h;
    for (int k = 0; k < 5; ++k) sum += ws[k] * f(m + 0.5 * h * xs[k]);
  }
  return 0.5 * h * sum;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  const std::string source_dir = KOOPCHECK_SOURCE_DIR;
  const std::string config_path = source_dir + "/configs/default.json";
  const auto config = ExperimentConfig::load(config_path);
  Workspace ws(config);
  const double tol = config.integrator_tolerance;
  const auto bistable = make_system("bistable");
  const auto up = bistable_unstable_oracle();
  const auto down = bistable_stable_oracle();

  criterion("AC1", "oracle validation", [&] {
    // library check, then an independent Richardson central difference
    double lib_err = 0.0;
    bool lib_ok = true;
    for (const auto& o : {up, down}) {
      const auto v = validate_oracle(o, bistable, Box(vec1(-2.0), vec1(2.0)), 1000, derive_seed(config.seed, "ac1"));
      lib_ok = lib_ok && v.passed && v.points == 1000;
      lib_err = std::max(lib_err, v.max_error);
    }
    Rng rng(derive_seed(config.seed, "ac1/fd"));
    double fd_err = 0.0;
    int points = 0;
    while (points < 1000) {
      const double x = uniform(rng, -2.0, 2.0);
      const double dist = std::min({std::abs(x), std::abs(x - 1.0), std::abs(x + 1.0)});
      if (dist < 0.02) continue;
      ++points;
      for (const auto& o : {up, down}) {
        auto d = [&](double h) { return (real_phi(o, x + h) - real_phi(o, x - h)) / (2 * h); };
        // two Richardson levels; step scaled by the distance to the singular set
        const double h = 0.01 * dist;
        auto r1 = [&](double s) { return (4.0 * d(s / 2) - d(s)) / 3.0; };
        const double deriv = (16.0 * r1(h / 2) - r1(h)) / 15.0;
        const double phi = real_phi(o, x);
        fd_err = std::max(fd_err, std::abs((x - x * x * x) * deriv - o.lambda.real() * phi) / (1.0 + std::abs(phi)));
      }
    }
    return Outcome{lib_ok && lib_err <= 1e-8 && fd_err <= 1e-8,
                   "library max error " + fmt(lib_err) + ", independent FD max error " + fmt(fd_err) + " (tol 1e-8)"};
  });

  criterion("AC2", "invariant-subspace exactness", [&] {
    double gen_err = 0.0, disc_err = 0.0;
    const auto& g = ws.fit("linear_scalar_generator");
    const auto& e = ws.fit("linear_scalar_edmd");
    if (g.eigen.pairs.size() != 5 || e.eigen.pairs.size() != 5) return Outcome{false, "expected five eigenpairs"};
    std::vector<double> gre, dre;
    for (const auto& p : g.eigen.pairs) {
      gre.push_back(p.lambda.real());
      gen_err = std::max(gen_err, std::abs(p.lambda.imag()));
    }
    for (const auto& p : e.eigen.pairs) {
      dre.push_back(p.lambda_discrete->real());
      disc_err = std::max(disc_err, std::abs(p.lambda_discrete->imag()));
    }
    std::sort(gre.begin(), gre.end(), std::greater<>());
    std::sort(dre.begin(), dre.end(), std::greater<>());
    const double dt = e.discrete->dt;
    for (int k = 1; k <= 5; ++k) {
      gen_err = std::max(gen_err, std::abs(gre[k - 1] + k));
      disc_err = std::max(disc_err, std::abs(dre[k - 1] - std::exp(-k * dt)));
    }
    return Outcome{gen_err <= 1e-6 && disc_err <= 1e-6,
                   "generator max |lambda + k| " + fmt(gen_err) + ", discrete max |lambda_d - e^{-k dt}| " +
                       fmt(disc_err) + " (tol 1e-6)"};
  });

  criterion("AC3", "evolution identity", [&] {
    Rng rng(derive_seed(config.seed, "ac3"));
    double oracle_dev = 0.0;
    for (const auto& o : {up, down}) {
      int starts = 0;
      while (starts < 100) {
        const double x = uniform(rng, -2.0, 2.0);
        if (o.singular_distance(vec1(x)) < 0.01) continue;
        ++starts;
        for (int i = 1; i <= 10; ++i) {
          const double t = 0.1 * i;
          const auto r = flow(bistable, vec1(x), t, tol);
          const Complex lhs = *o.phi(r.state);
          const Complex rhs = std::exp(o.lambda * t) * *o.phi(vec1(x));
          oracle_dev = std::max(oracle_dev, std::abs(lhs - rhs));
        }
      }
    }
    const auto& fit = ws.fit("duffing_edmd");
    const auto& duffing = ws.system("duffing");
    const double dt = fit.discrete->dt;
    const auto& dict = *fit.dictionary();
    double fitted_dev = 0.0;
    std::size_t tested = 0;
    for (const auto& x : fit.holdout_states) {
      const Vector y = flow(duffing, x, dt, tol).state;
      for (const auto& p : fit.eigen.pairs) {
        if (p.degenerate) continue;
        ++tested;
        const Complex lhs = eval_eigenfunction(p, dict, y);
        const Complex rhs = *p.lambda_discrete * eval_eigenfunction(p, dict, x);
        fitted_dev = std::max(fitted_dev, std::abs(lhs - rhs));
      }
    }
    const double bound = 10.0 * fit.holdout_residual;
    return Outcome{oracle_dev <= 1e-5 && fitted_dev <= bound,
                   "oracle max deviation " + fmt(oracle_dev) + " (tol 1e-5); fitted Duffing max deviation " +
                       fmt(fitted_dev) + " over " + std::to_string(tested) + " pair-samples vs 10 x holdout residual " +
                       fmt(bound)};
  });

  criterion("AC4", "eigenfunctions vanish at fixed points", [&] {
    const auto& fps = ws.fixed_points("bistable");
    if (fps.size() != 3) return Outcome{false, "expected three fixed points"};
    const auto& fit = ws.fit("bistable_edmd");
    double fitted = 0.0;
    std::size_t tested = 0;
    for (const auto& p : fit.eigen.pairs) {
      if (p.degenerate || std::abs(p.lambda) <= 1e-3) continue;
      ++tested;
      for (const auto& fp : fps) fitted = std::max(fitted, std::abs(eval_eigenfunction(p, *fit.dictionary(), fp.location)));
    }
    double oracle = 0.0;
    for (const auto& o : {up, down})
      for (const auto& fp : fps)
        if (const auto v = o.phi(fp.location)) oracle = std::max(oracle, std::abs(*v));
    return Outcome{fitted <= 5e-2 && oracle <= 1e-10,
                   "fitted max |phi(x*)| " + fmt(fitted) + " over " + std::to_string(tested) +
                       " pairs (tol 5e-2); oracle max " + fmt(oracle) + " (tol 1e-10)"};
  });

  criterion("AC5", "sublevel-set invariance", [&] {
    Rng rng(derive_seed(config.seed, "ac5"));
    std::vector<Vector> starts;
    while (starts.size() < 200) {
      const double x = uniform(rng, -2.0, 2.0);
      if (std::abs(x) >= 1.0 / std::sqrt(2.0)) starts.push_back(vec1(x));
    }
    const auto r = check_level_set_invariance(down.as_eigenpair(), bistable, 1.0, starts, 5.0, 1e-6);
    // closed-form trajectories on a 0.01 grid
    double exact = 0.0;
    for (const auto& s : starts)
      for (int i = 0; i <= 500; ++i) {
        const double x = 0.0 + s[0];
        const double xt = x * std::exp(0.01 * i) / std::sqrt(1.0 - x * x + x * x * std::exp(0.02 * i));
        exact = std::max(exact, (1.0 - xt * xt) / (xt * xt) - 1.0);
      }
    const double lib = r.statistics.count("max_relative_exceedance") ? r.statistics.at("max_relative_exceedance") : 1.0;
    const bool all_inside = r.statistics.at("starts_in_level_set") == 200.0;
    return Outcome{r.verdict == Verdict::supported && all_inside && lib <= 1e-6 && exact <= 1e-6,
                   "library max exceedance " + fmt(std::max(lib, 0.0)) + ", closed-form max exceedance " +
                       fmt(std::max(exact, 0.0)) + " over 200 starts (tol 1e-6)"};
  });

  criterion("AC6", "escape time", [&] {
    const Box m(vec1(0.1), vec1(0.9));
    Rng rng(derive_seed(config.seed, "ac6"));
    std::vector<Vector> starts;
    for (int k = 0; k < 200; ++k) starts.push_back(uniform_in_box(rng, m));
    const auto r = check_escape_time(up.as_eigenpair(), bistable, m, starts, 0.01);
    const double eps = 0.1 / std::sqrt(1 - 0.01), c = 0.9 / std::sqrt(1 - 0.81);
    const double t_bound = std::log(c / eps);
    const bool bound_ok = std::abs(r.statistics.at("predicted_exit_bound") - t_bound) <= 1e-6 * t_bound &&
                          std::abs(t_bound - 3.022) <= 1e-3;
    const double exited = r.statistics.at("exited");
    const double max_exit = r.statistics.at("max_exit_time");
    return Outcome{r.verdict == Verdict::supported && bound_ok && exited == 200.0 && max_exit <= t_bound * 1.01,
                   "T = ln(C/eps) = " + fmt(t_bound) + " (library " + fmt(r.statistics.at("predicted_exit_bound")) +
                       "), exited " + fmt(exited) + "/200, max exit time " + fmt(max_exit)};
  });

  criterion("AC7", "basin classification by the invariant eigenfunction", [&] {
    struct Case {
      std::string fit;
      std::vector<int> resolution;
      double accuracy;
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : {Case{"bistable_edmd", {401}, 0.99}, Case{"duffing_edmd", {101, 101}, 0.95}}) {
      const auto& fit = ws.fit(c.fit);
      const auto& fb = config.fit(c.fit);
      const auto& grid = ws.basin_grid(fb.system, c.resolution, kDefaultBasinHorizon, kDefaultCaptureRadius);
      const auto idx = select_invariant_pair(fit.eigen.pairs, grid);
      if (!idx) {
        ok = false;
        detail += c.fit + ": no near-zero pair; ";
        continue;
      }
      const auto s = basin_separation(fit.eigen.pairs[*idx], grid);
      const bool pass = s.accuracy >= c.accuracy && s.within_std <= 0.05 * s.gap;
      ok = ok && pass;
      detail += c.fit + " accuracy " + fmt(s.accuracy) + " (>= " + fmt(c.accuracy) + "), sigma_w/gap " +
                fmt(s.within_std / s.gap) + "; ";
    }
    return Outcome{ok, detail + "tol sigma_w/gap 0.05"};
  });

  criterion("AC8", "spectrum mapping", [&] {
    double worst = 0.0, agreement = 1.0;
    std::size_t matched = 0;
    for (const auto& [gid, did] : {std::pair{"linear_scalar_generator", "linear_scalar_edmd"},
                                   std::pair{"linear_diagonal_generator", "linear_diagonal_edmd"}}) {
      const auto& g = ws.fit(gid);
      const auto& d = ws.fit(did);
      std::vector<Complex> gl, dl;
      for (const auto& p : g.eigen.pairs) gl.push_back(p.lambda);
      for (const auto& p : d.eigen.pairs) dl.push_back(*p.lambda_discrete);
      const auto c = compare_spectra(gl, dl, d.discrete->dt);
      // independent recomputation of the mapping error for each reported match
      for (const auto& m : c.matches)
        worst = std::max(worst, std::abs(std::exp(m.generator * d.discrete->dt) - m.discrete));
      worst = std::max(worst, c.max_mapping_error);
      agreement = std::min(agreement, c.class_agreement);
      matched += c.matches.size();
      if (c.matches.size() != gl.size()) return Outcome{false, std::string(gid) + ": unmatched eigenvalues"};
    }
    return Outcome{worst <= 1e-4 && agreement == 1.0,
                   "max |exp(lambda_g dt) - lambda_d| " + fmt(worst) + " over " + std::to_string(matched) +
                       " matches (tol 1e-4), class agreement " + fmt(agreement)};
  });

  criterion("AC9", "closed orbits and the imaginary axis", [&] {
    const auto& h = ws.fit("harmonic_edmd");
    double max_re = 0.0;
    for (const auto& p : h.eigen.pairs) max_re = std::max(max_re, std::abs(p.lambda.real()));
    const bool a = max_re <= 1e-6;

    const auto& u = ws.fit("undamped_edmd");
    const auto& cfg8 = *config.checks.theorem8;
    const auto orbits = sample_orbits(ws.system("duffing_undamped"), cfg8.orbit_starts, cfg8.horizon,
                                      cfg8.samples_per_orbit, tol);
    double worst = 0.0;
    std::size_t off_axis = 0;
    for (const auto& p : u.eigen.pairs) {
      if (p.degenerate || std::abs(p.lambda.real()) <= 0.05) continue;
      ++off_axis;
      double sup = 0.0, on_orbit = 0.0;
      for (const auto& x : u.training_states()) sup = std::max(sup, std::abs(eval_eigenfunction(p, *u.dictionary(), x)));
      for (const auto& x : orbits) on_orbit = std::max(on_orbit, std::abs(eval_eigenfunction(p, *u.dictionary(), x)));
      worst = std::max(worst, on_orbit / sup);
    }
    const bool b = worst <= 0.05;
    return Outcome{a && b, "(a) harmonic max |Re lambda| " + fmt(max_re) + " (tol 1e-6) " + (a ? "ok" : "fails") +
                               "; (b) undamped Duffing: " + std::to_string(off_axis) +
                               " pairs with |Re lambda| > 0.05, max orbit |phi|/sup " + fmt(worst) + " (tol 0.05) " +
                               (b ? "ok" : "fails")};
  });

  criterion("AC10", "basin crossing under control", [&] {
    const auto run = run_control(ws);
    const ExperimentReport* r = nullptr;
    for (const auto& rep : run.reports)
      if (rep.scenario == "crossing") r = &rep;
    if (!r) return Outcome{false, "no 'crossing' scenario"};
    if (r->x0.size() != 1 || r->x0[0] != -0.5 || r->schedule_description.find("1.5") == std::string::npos)
      return Outcome{false, "scenario is not u = 1.5 from x0 = -0.5"};
    if (!r->crossing_time) return Outcome{false, "no crossing within the horizon"};
    // time to reach the basin boundary x = 0 under x' = x - x^3 + 1.5
    const double exact = integrate([](double x) { return 1.0 / (x - x * x * x + 1.5); }, -0.5, 0.0, 200);
    const double grid_time = std::ceil(exact / kCrossingGrid) * kCrossingGrid;
    const bool time_ok = std::abs(*r->crossing_time - grid_time) <= kCrossingGrid + 1e-12;
    const double bound = null_rate_bound(run.decomposition, run.input_bound.bound) * *r->crossing_time;
    const bool cert = r->null_change_at_crossing <= bound * (1.0 + 1e-6);
    const double ind = r->indicator_error_at_crossing.value_or(0.0);
    return Outcome{time_ok && cert && ind > 0.5,
                   "t_c " + fmt(*r->crossing_time) + " vs quadrature " + fmt(exact) + "; null change " +
                       fmt(r->null_change_at_crossing) + " <= |B_r| B t_c = " + fmt(bound) +
                       "; indicator error at t_c " + fmt(ind) + " (> 0.5)"};
  });

  criterion("AC11", "deterministic verify", [&] {
    const auto base = fs::temp_directory_path() / "koopcheck_acceptance_ac11";
    fs::remove_all(base);
    std::vector<std::string> docs;
    for (const char* run : {"a", "b"}) {
      const auto out = base / run;
      const std::string cmd = std::string("\"") + KOOPCHECK_CLI_PATH + "\" --config \"" + config_path + "\" --out \"" +
                              out.string() + "\" verify > \"" + (base / (std::string(run) + ".log")).string() + "\" 2>&1";
      fs::create_directories(base);
      const int status = std::system(cmd.c_str());
      if (status == -1) return Outcome{false, "could not start the CLI"};
      docs.push_back(read_file(out / "report.json"));
    }
    const bool same = !docs[0].empty() && docs[0] == docs[1];
    return Outcome{same, "report.json " + std::to_string(docs[0].size()) + " bytes, runs " +
                             (same ? "byte-identical" : "differ")};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
