#include "koopcheck/suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "koopcheck/checks.hpp"
#include "koopcheck/oracles.hpp"

namespace koopcheck {

const std::vector<std::string>& registered_checks() {
  static const std::vector<std::string> ids = {"lemma1",          "theorem2",   "theorem3",
                                               "theorem4",        "exit_theorem", "lemma6_theorem7",
                                               "corollary5",      "theorem8"};
  return ids;
}

const std::shared_ptr<const Dictionary>& FittedModel::dictionary() const {
  return discrete ? discrete->dictionary : generator->dictionary;
}

double FittedModel::residual() const { return discrete ? discrete->residual : generator->residual; }

const std::vector<Vector>& FittedModel::training_states() const {
  return discrete ? discrete->training_states : generator->training_states;
}

// ---------------------------------------------------------------------------

Workspace::Workspace(const ExperimentConfig& config) : config_(config) {}

const System& Workspace::system(const std::string& id) {
  auto it = systems_.find(id);
  if (it != systems_.end()) return it->second;
  const auto& block = config_.system(id);
  System sys = make_system(block.name, block.parameters);
  if (static_cast<std::size_t>(block.region.dimension()) != sys.dimension())
    throw ConfigError("system '" + id + "': region dimension does not match the system");
  return systems_.emplace(id, std::move(sys)).first->second;
}

const std::vector<FixedPoint>& Workspace::fixed_points(const std::string& system_id) {
  auto it = fixed_points_.find(system_id);
  if (it != fixed_points_.end()) return it->second;
  const auto& block = config_.system(system_id);
  const auto& sys = system(system_id);
  int seeds = block.fixed_point_seeds;
  if (seeds == 0) seeds = sys.dimension() == 1 ? 41 : 9;
  const std::vector<int> res(sys.dimension(), seeds);
  auto search = find_fixed_points(sys, grid_points(block.region, res), 1e-12);
  return fixed_points_.emplace(system_id, std::move(search.points)).first->second;
}

const BasinGrid& Workspace::basin_grid(const std::string& system_id, const std::vector<int>& resolution,
                                       double horizon, double capture_radius) {
  const auto key = std::make_tuple(system_id, resolution, horizon, capture_radius);
  auto it = grids_.find(key);
  if (it != grids_.end()) return it->second;
  const auto& sys = system(system_id);
  if (resolution.size() != sys.dimension())
    throw ConfigError("basin grid for '" + system_id + "': resolution has the wrong dimension");
  const auto& fps = fixed_points(system_id);
  auto grid = compute_basin_grid(sys, grid_points(config_.system(system_id).region, resolution), fps,
                                 horizon, capture_radius, config_.integrator_tolerance);
  return grids_.emplace(key, std::move(grid)).first->second;
}

std::shared_ptr<const Dictionary> Workspace::dictionary(const std::string& id) {
  auto it = dictionaries_.find(id);
  if (it != dictionaries_.end()) return it->second;
  const auto& block = config_.dictionary(id);
  Dictionary base = block.kind == "monomial"
                        ? build_monomial_dictionary(block.dimension, block.max_degree, block.include_constant)
                        : build_rbf_dictionary(sample_rbf_centers(block.region, block.centers,
                                                                  derive_seed(config_.seed, "dictionary/" + id)),
                                               block.shape, block.include_constant);
  std::shared_ptr<const Dictionary> dict;
  if (block.indicators) {
    const auto& ib = *block.indicators;
    if (system(ib.system).dimension() != block.dimension)
      throw ConfigError("dictionary '" + id + "': indicator system has a different dimension");
    const auto& grid = basin_grid(ib.system, ib.resolution, ib.horizon, ib.capture_radius);
    dict = std::make_shared<const Dictionary>(build_indicator_augmented(base, grid));
  } else {
    dict = std::make_shared<const Dictionary>(std::move(base));
  }
  return dictionaries_.emplace(id, dict).first->second;
}

const FittedModel& Workspace::fit(const std::string& id) {
  auto it = fits_.find(id);
  if (it != fits_.end()) return it->second;
  const auto& fb = config_.fit(id);
  const auto& sys = system(fb.system);
  auto dict = dictionary(fb.dictionary);
  if (dict->dimension() != sys.dimension())
    throw ConfigError("fit '" + id + "': dictionary dimension does not match the system");
  const double tol = config_.integrator_tolerance;
  FittedModel fm;
  fm.id = id;
  fm.method = fb.method;
  fm.region = config_.system(fb.system).region;
  if (fb.method == "edmd") {
    const auto pairs = sample_snapshot_pairs(sys, fm.region, fb.samples, fb.dt,
                                             derive_seed(config_.seed, "fit/" + id), tol);
    const auto kept = drop_indicator_straddling(pairs, *dict);
    fm.dropped_pairs = pairs.size() - kept.size();
    fm.discrete = fit_edmd(kept, dict, fb.gamma);
    fm.eigen = eig(*fm.discrete);
    if (fb.holdout > 0) {
      const auto hold = drop_indicator_straddling(
          sample_snapshot_pairs(sys, fm.region, fb.holdout, fb.dt, derive_seed(config_.seed, "holdout/" + id), tol),
          *dict);
      fm.holdout_residual = residual(*fm.discrete, hold);
      fm.holdout_states = hold.x;
    } else {
      fm.holdout_residual = fm.discrete->residual;
    }
  } else {
    Rng rng(derive_seed(config_.seed, "fit/" + id));
    std::vector<Vector> samples(fb.samples);
    for (auto& x : samples) x = uniform_in_box(rng, fm.region);
    fm.generator = fit_generator_edmd(samples, sys, dict, fb.gamma);
    fm.eigen = eig(*fm.generator);
    if (fb.holdout > 0) {
      Rng hr(derive_seed(config_.seed, "holdout/" + id));
      fm.holdout_states.resize(fb.holdout);
      for (auto& x : fm.holdout_states) x = uniform_in_box(hr, fm.region);
      fm.holdout_residual = residual(*fm.generator, sys, fm.holdout_states);
    } else {
      fm.holdout_residual = fm.generator->residual;
    }
  }
  return fits_.emplace(id, std::move(fm)).first->second;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Vector> uniform_starts(const Box& box, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out(n);
  for (auto& x : out) x = uniform_in_box(rng, box);
  return out;
}

std::string fixed_point_tag(const FixedPoint& fp) {
  std::string s = "x*=(";
  char buf[32];
  for (Eigen::Index i = 0; i < fp.location.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.4g", i ? "," : "", fp.location[i] + 0.0);
    s += buf;
  }
  return s + ")";
}

TheoremReport renamed(TheoremReport r, std::string id) {
  r.theorem_id = std::move(id);
  return r;
}

TheoremReport not_configured(const std::string& id) {
  TheoremReport r;
  r.theorem_id = id;
  r.mark_inconclusive("not configured");
  return r;
}

TheoremReport merged_or_empty(const std::string& id, const std::vector<TheoremReport>& parts,
                              const std::string& empty_reason) {
  if (parts.empty()) {
    TheoremReport r;
    r.theorem_id = id;
    r.mark_inconclusive(empty_reason);
    return r;
  }
  return merge_reports(id, parts);
}

const AnalyticOracle& find_oracle(const std::vector<AnalyticOracle>& oracles, const std::string& expr) {
  for (const auto& o : oracles)
    if (o.expression_id == expr) return o;
  throw ConfigError("no analytic oracle '" + expr + "' for this system");
}

class Runner {
 public:
  explicit Runner(Workspace& ws) : ws_(ws), cfg_(ws.config()) {}

  TheoremReport run(const std::string& id) {
    try {
      if (id == "lemma1") return lemma1();
      if (id == "theorem2") return theorem2();
      if (id == "theorem3") return theorem3();
      if (id == "theorem4") return theorem4();
      if (id == "exit_theorem") return exit_theorem();
      if (id == "lemma6_theorem7") return lemma6_theorem7();
      if (id == "corollary5") return corollary5();
      if (id == "theorem8") return theorem8();
      throw ConfigError("unknown check id '" + id + "'");
    } catch (const std::exception& e) {
      TheoremReport r;
      r.theorem_id = id;
      r.mark_inconclusive(std::string("error: ") + e.what());
      return r;
    }
  }

 private:
  std::uint64_t seed(const std::string& stream) const { return derive_seed(cfg_.seed, "check/" + stream); }

  std::vector<AnalyticOracle> oracles(const std::string& system_id) {
    auto out = oracles_for(ws_.system(system_id));
    if (out.empty()) throw ConfigError("system '" + system_id + "' has no analytic oracles");
    return out;
  }

  TheoremReport lemma1() {
    if (!cfg_.checks.lemma1) return not_configured("lemma1");
    const auto& b = *cfg_.checks.lemma1;
    std::vector<TheoremReport> parts;
    for (const auto& sid : b.oracle_systems) {
      std::vector<Eigenpair> pairs;
      for (const auto& o : oracles(sid)) pairs.push_back(o.as_eigenpair());
      parts.push_back(renamed(check_fixed_point_zero(pairs, ws_.fixed_points(sid), b.tol_lambda, b.tol_phi_oracle),
                              "oracle." + sid));
    }
    for (const auto& fid : b.fits) {
      const auto& fm = ws_.fit(fid);
      auto r = check_fixed_point_zero(fm.eigen.pairs, ws_.fixed_points(cfg_.fit(fid).system), b.tol_lambda,
                                      b.tol_phi_fitted);
      r.set_statistic("fit_residual", fm.residual());
      parts.push_back(renamed(std::move(r), "fitted." + fid));
    }
    return merged_or_empty("lemma1", parts, "no oracle systems or fits listed");
  }

  TheoremReport theorem2() {
    if (!cfg_.checks.theorem2) return not_configured("theorem2");
    const auto& b = *cfg_.checks.theorem2;
    std::vector<TheoremReport> parts;
    const auto& fps = ws_.fixed_points(b.system);
    for (const auto& o : oracles(b.system)) {
      if (!(o.lambda.real() > 0.0)) continue;
      for (const auto& fp : fps) {
        if (fp.stability != Stability::stable) continue;
        parts.push_back(renamed(check_blowup_near_stable_point(o.as_eigenpair(), fp, b.radii, b.threshold),
                                o.expression_id + "@" + fixed_point_tag(fp)));
      }
    }
    return merged_or_empty("theorem2", parts, "no oracle with Re lambda > 0 near a stable fixed point");
  }

  TheoremReport theorem3() {
    if (!cfg_.checks.theorem3) return not_configured("theorem3");
    const auto& b = *cfg_.checks.theorem3;
    const auto& sys = ws_.system(b.system);
    const auto starts = uniform_starts(b.region, b.starts, seed("theorem3"));
    std::vector<TheoremReport> parts;
    for (const auto& o : oracles(b.system)) {
      if (!(o.lambda.real() > 0.0)) continue;
      parts.push_back(renamed(check_escape_time(o.as_eigenpair(), sys, b.region, starts, b.tol, b.dense_resolution,
                                                cfg_.integrator_tolerance),
                              o.expression_id));
    }
    return merged_or_empty("theorem3", parts, "no oracle with Re lambda > 0");
  }

  // Starts drawn from the box and kept when |phi| <= level.
  std::vector<Vector> level_set_starts(const Eigenpair& pair, const Box& box, double level, std::size_t n,
                                       std::uint64_t s) {
    Rng rng(s);
    std::vector<Vector> out;
    const std::size_t max_draws = std::max<std::size_t>(1000, 1000 * n);
    for (std::size_t k = 0; k < max_draws && out.size() < n; ++k) {
      Vector x = uniform_in_box(rng, box);
      const auto v = evaluate(pair, x);
      if (v && std::isfinite(std::abs(*v)) && std::abs(*v) <= level) out.push_back(std::move(x));
    }
    return out;
  }

  TheoremReport theorem4() {
    if (!cfg_.checks.theorem4) return not_configured("theorem4");
    const auto& b = *cfg_.checks.theorem4;
    const auto& sys = ws_.system(b.system);
    const auto all = oracles(b.system);
    std::vector<Eigenpair> pairs;
    for (const auto& o : all)
      if (o.lambda.real() <= 0.0) pairs.push_back(o.as_eigenpair());
    // products phi_a^r phi_b^s with a zero combined rate are invariants
    for (const auto& a : all)
      for (const auto& c : all) {
        if (!(a.lambda.real() > 0.0 && c.lambda.real() < 0.0)) continue;
        for (int r = 1; r <= 4; ++r)
          for (int s = 1; s <= 4; ++s)
            if (std::abs(static_cast<double>(r) * a.lambda + static_cast<double>(s) * c.lambda) < 1e-12 &&
                std::gcd(r, s) == 1)
              pairs.push_back(compose_eigenpairs(a.as_eigenpair(), c.as_eigenpair(), r, s));
      }
    std::vector<TheoremReport> parts;
    for (const auto& p : pairs) {
      const auto starts = level_set_starts(p, b.start_region, b.level, b.starts, seed("theorem4/" + p.label));
      auto r = check_level_set_invariance(p, sys, b.level, starts, b.horizon, b.drift_tol, b.sample_dt,
                                          cfg_.integrator_tolerance);
      if (starts.size() < b.starts)
        r.notes.push_back("only " + std::to_string(starts.size()) + " starts found inside the level set");
      parts.push_back(renamed(std::move(r), p.label));
    }
    return merged_or_empty("theorem4", parts, "no oracle with Re lambda <= 0");
  }

  TheoremReport exit_theorem() {
    if (!cfg_.checks.exit_theorem) return not_configured("exit_theorem");
    const auto& b = *cfg_.checks.exit_theorem;
    const auto& sys = ws_.system(b.system);
    const auto all = oracles(b.system);
    std::vector<TheoremReport> parts;
    for (std::size_t k = 0; k < b.cases.size(); ++k) {
      const auto& c = b.cases[k];
      const auto& o = find_oracle(all, c.oracle);
      const auto starts = uniform_starts(c.region, b.starts, seed("exit_theorem/" + std::to_string(k)));
      parts.push_back(renamed(check_exit_when_bounded_away(o.as_eigenpair(), sys, c.region, starts, b.horizon,
                                                           b.dense_resolution, cfg_.integrator_tolerance),
                              "case" + std::to_string(k) + "." + o.expression_id));
    }
    return merged_or_empty("exit_theorem", parts, "no cases listed");
  }

  const BasinGrid& grid_for_fit(const std::string& fit_id) {
    const auto& fb = cfg_.fit(fit_id);
    const auto& db = cfg_.dictionary(fb.dictionary);
    if (db.indicators && db.indicators->system == fb.system)
      return ws_.basin_grid(fb.system, db.indicators->resolution, db.indicators->horizon,
                            db.indicators->capture_radius);
    const std::vector<int> res(ws_.system(fb.system).dimension(), 101);
    return ws_.basin_grid(fb.system, res, kDefaultBasinHorizon, kDefaultCaptureRadius);
  }

  TheoremReport lemma6_theorem7() {
    if (!cfg_.checks.lemma6_theorem7) return not_configured("lemma6_theorem7");
    const auto& b = *cfg_.checks.lemma6_theorem7;
    std::vector<TheoremReport> parts;
    for (const auto& fid : b.fits) {
      const auto& fm = ws_.fit(fid);
      const auto& grid = grid_for_fit(fid);
      const auto idx = select_invariant_pair(fm.eigen.pairs, grid);
      TheoremReport r;
      if (!idx) {
        r.mark_inconclusive("no fitted pair with a near-zero rate");
      } else {
        const auto& p = fm.eigen.pairs[*idx];
        r = check_basin_constancy(p, grid, b.separation_tol);
        r.set_statistic("pair_index", static_cast<double>(*idx));
        r.set_statistic("lambda_re", p.lambda.real());
        r.set_statistic("lambda_im", p.lambda.imag());
      }
      r.set_statistic("fit_residual", fm.residual());
      parts.push_back(renamed(std::move(r), fid));
    }
    return merged_or_empty("lemma6_theorem7", parts, "no fits listed");
  }

  TheoremReport corollary5() {
    if (!cfg_.checks.corollary5) return not_configured("corollary5");
    const auto& b = *cfg_.checks.corollary5;
    std::vector<TheoremReport> parts;
    {
      const auto& sys = ws_.system(b.oracle_system);
      const auto& fps = ws_.fixed_points(b.oracle_system);
      const std::vector<int> res(sys.dimension(), b.oracle_region_resolution);
      const auto region = grid_points(b.oracle_region, res);
      for (const auto& o : oracles(b.oracle_system)) {
        const auto pair = o.as_eigenpair();
        for (std::size_t i = 0; i < fps.size(); ++i) {
          const auto& fp = fps[i];
          if (fp.stability == Stability::stable || fp.stability == Stability::non_hyperbolic) continue;
          if (!b.oracle_region.contains(fp.location)) continue;
          std::vector<Vector> manifold;
          ManifoldDirection dir;
          if (o.lambda.real() > kManifoldRateMargin) {
            // the equilibrium itself lies on its stable manifold
            dir = ManifoldDirection::stable;
            manifold.push_back(fp.location);
          } else if (o.lambda.real() < -kManifoldRateMargin) {
            dir = ManifoldDirection::unstable;
            manifold = trace_unstable_manifold(sys, fp, b.offset, b.horizon, b.samples_per_branch,
                                               cfg_.integrator_tolerance);
          } else {
            continue;
          }
          parts.push_back(renamed(check_zero_on_invariant_manifold(pair, manifold, dir, b.oracle_tol, region,
                                                                   b.bound_cap, &fp.location),
                                  "oracle." + o.expression_id + "@" + fixed_point_tag(fp)));
        }
      }
    }
    if (!b.fit.empty()) parts.push_back(corollary5_fitted(b));
    return merged_or_empty("corollary5", parts, "no hyperbolic non-stable fixed point in the oracle region");
  }

  // Fitted pairs: boundedness of the underlying eigenfunction cannot be
  // established from samples, so this part only reports statistics.
  TheoremReport corollary5_fitted(const Corollary5Block& b) {
    const auto& fm = ws_.fit(b.fit);
    const auto& sid = cfg_.fit(b.fit).system;
    const auto& sys = ws_.system(sid);
    TheoremReport out;
    out.theorem_id = "fitted." + b.fit;
    out.tolerances["relative_phi"] = b.fitted_tol;
    std::size_t tested = 0, bounded = 0, exceeding = 0;
    double worst = 0.0;
    std::string hashes;
    for (const auto& fp : ws_.fixed_points(sid)) {
      if (fp.stability != Stability::saddle && fp.stability != Stability::unstable) continue;
      const auto manifold = trace_unstable_manifold(sys, fp, b.offset, b.horizon, b.samples_per_branch,
                                                    cfg_.integrator_tolerance);
      for (const auto& p : fm.eigen.pairs) {
        if (p.degenerate || !(p.lambda.real() < -kManifoldRateMargin)) continue;
        ++tested;
        const auto r = check_zero_on_invariant_manifold(p, manifold, ManifoldDirection::unstable, b.fitted_tol,
                                                        fm.training_states(), b.bound_cap, &fp.location);
        hashes += r.inputs_hash;
        if (r.verdict == Verdict::inconclusive) continue;
        ++bounded;
        const double rel = r.statistics.at("max_relative_phi_on_manifold");
        worst = std::max(worst, rel);
        if (rel > b.fitted_tol) ++exceeding;
      }
    }
    out.set_statistic("pairs_tested", static_cast<double>(tested));
    out.set_statistic("pairs_bounded_on_samples", static_cast<double>(bounded));
    out.set_statistic("pairs_exceeding_tol", static_cast<double>(exceeding));
    out.set_statistic("max_relative_phi_on_manifold", worst);
    out.inputs_hash = to_hex64(fnv1a64(hashes));
    out.mark_inconclusive(
        "fitted eigenfunctions are only sampled, so the boundedness hypothesis cannot be certified; "
        "statistics are qualitative");
    return out;
  }

  TheoremReport theorem8() {
    if (!cfg_.checks.theorem8) return not_configured("theorem8");
    const auto& b = *cfg_.checks.theorem8;
    std::vector<TheoremReport> parts;
    for (const auto& c : b.cases) {
      const auto& fm = ws_.fit(c.fit);
      const auto& sys = ws_.system(cfg_.fit(c.fit).system);
      std::vector<Vector> starts = b.orbit_starts;
      if (starts.empty())
        for (double a : {0.25, 0.5, 0.75, 1.25, 1.5})
          for (double s : {1.0, -1.0}) {
            Vector x = Vector::Zero(static_cast<Eigen::Index>(sys.dimension()));
            x[0] = s * a;
            starts.push_back(x);
          }
      for (const auto& x : starts)
        if (static_cast<std::size_t>(x.size()) != sys.dimension())
          throw ConfigError("theorem8: orbit start has the wrong dimension");
      const auto orbits = sample_orbits(sys, starts, b.horizon, b.samples_per_orbit, cfg_.integrator_tolerance);
      auto r = check_closed_orbit_spectrum(fm.eigen.pairs, sys, orbits, fm.training_states(), c.tol_re, c.tol_phi);
      r.set_statistic("fit_residual", fm.residual());
      parts.push_back(renamed(std::move(r), c.fit));
    }
    return merged_or_empty("theorem8", parts, "no cases listed");
  }

  Workspace& ws_;
  const ExperimentConfig& cfg_;
};

}  // namespace

std::vector<TheoremReport> run_all_checks(Workspace& workspace, const std::optional<std::string>& only) {
  const auto& ids = registered_checks();
  if (only && std::find(ids.begin(), ids.end(), *only) == ids.end())
    throw ConfigError("unknown check id '" + *only + "'");
  Runner runner(workspace);
  std::vector<TheoremReport> out;
  for (const auto& id : ids)
    if (!only || *only == id) out.push_back(runner.run(id));
  return out;
}

std::vector<TheoremReport> run_all_checks(const ExperimentConfig& config, const std::optional<std::string>& only) {
  Workspace ws(config);
  return run_all_checks(ws, only);
}

ControlRun run_control(Workspace& workspace) {
  const auto& cfg = workspace.config();
  if (!cfg.control) throw ConfigError("config has no control block");
  const auto& cb = *cfg.control;
  const auto& sys = workspace.system(cb.system);
  if (sys.control_arity() == 0) throw ConfigError("control system '" + cb.system + "' has no input");
  if (static_cast<std::size_t>(cb.input_box.dimension()) != sys.control_arity())
    throw ConfigError("control input_box does not match the input dimension");
  if (workspace.system(cb.label_system).dimension() != sys.dimension())
    throw ConfigError("control label_system has a different state dimension");
  auto sdict = workspace.dictionary(cb.state_dictionary);
  if (sdict->dimension() != sys.dimension())
    throw ConfigError("control state dictionary dimension does not match the system");
  auto cdict = std::make_shared<const ControlDictionary>(build_control_dictionary(
      sys.dimension(), sys.control_arity(), cb.control_state_degree, cb.control_input_degree));
  const Box& state_box = cfg.system(cb.system).region;

  ControlRun run;
  const auto data = sample_control_data(state_box, cb.input_box, cb.samples, cb.zero_input_fraction,
                                        derive_seed(cfg.seed, "control/data"));
  run.model = fit_control_model(sys, data, sdict, cdict, cb.gamma);
  run.decomposition = eigen_decompose_control(run.model, cb.null_threshold);
  run.input_bound = estimate_input_bound(*cdict, state_box, cb.input_box, cb.bound_samples,
                                         derive_seed(cfg.seed, "control/bound"));
  const auto& fps = workspace.fixed_points(cb.label_system);
  for (const auto& sc : cb.scenarios) {
    CrossingSetup setup;
    setup.scenario = sc.id;
    setup.x0 = sc.x0;
    setup.schedule = sc.schedule;
    setup.horizon = cb.horizon;
    setup.state_box = state_box;
    setup.input_box = cb.input_box;
    setup.input_bound = run.input_bound;
    setup.fixed_points = fps;
    setup.tol = cfg.integrator_tolerance;
    run.reports.push_back(basin_crossing_experiment(sys, run.model, run.decomposition, setup));
  }
  return run;
}

}  // namespace koopcheck
