#include "koopcheck/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string_view>

#include "parallel.hpp"

namespace koopcheck {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Canonical byte string of everything a check consumed, hashed for the report.
class InputHasher {
 public:
  InputHasher& add(std::string_view s) {
    buf_ += s;
    buf_ += '|';
    return *this;
  }
  InputHasher& add(double v) { return add(hexfloat(v)); }
  InputHasher& add(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) add(v[i]);
    return add("/");
  }
  InputHasher& add(const std::vector<Vector>& vs) {
    for (const auto& v : vs) add(v);
    return add("//");
  }
  InputHasher& add(const std::vector<double>& vs) {
    for (double v : vs) add(v);
    return add("//");
  }
  InputHasher& add(const Eigenpair& p) {
    add(p.label).add(to_string(p.source)).add(p.lambda.real()).add(p.lambda.imag());
    for (Eigen::Index i = 0; i < p.coefficients.size(); ++i)
      add(p.coefficients[i].real()).add(p.coefficients[i].imag());
    if (p.dictionary) add(to_hex64(p.dictionary->hash()));
    return add("#");
  }
  InputHasher& add(const System& s) {
    add(s.name());
    for (const auto& [k, v] : s.spec().parameters) add(k).add(v);
    return *this;
  }
  InputHasher& add(const Box& b) { return add(b.lower).add(b.upper); }
  [[nodiscard]] std::string hex() const { return to_hex64(fnv1a64(buf_)); }

 private:
  std::string buf_;
};

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

std::optional<double> finite_abs(const Eigenpair& pair, const Vector& x) {
  const auto v = evaluate(pair, x);
  if (!v || !std::isfinite(v->real()) || !std::isfinite(v->imag())) return std::nullopt;
  return std::abs(*v);
}

// First time in (0, t_max] at which the trajectory from x0 leaves `region`
// (or escapes); 0 when x0 starts outside. The crossing is located on a fixed
// grid and refined by bisection.
std::optional<double> exit_time(const System& system, const Box& region, const Vector& x0,
                                double t_max, double tol) {
  if (!region.contains(x0)) return 0.0;
  if (!(t_max > 0.0)) return std::nullopt;
  constexpr std::size_t kGrid = 2000;
  const auto times = linspace(0.0, t_max, kGrid + 1);
  const auto traj = sample_trajectory(system, x0, times, tol);
  std::size_t k = 1;
  while (k < traj.states.size() && region.contains(traj.states[k])) ++k;
  if (k >= traj.states.size() && !traj.escaped) return std::nullopt;
  if (k > kGrid) return std::nullopt;
  // Crossing inside (times[k-1], times[k]].
  const Vector& base = traj.states[k - 1];
  double lo = 0.0;
  double hi = times[k] - times[k - 1];
  for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + times[k]); ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto r = flow(system, base, mid, tol);
    if (r.escaped || !region.contains(r.state))
      hi = mid;
    else
      lo = mid;
  }
  return times[k - 1] + hi;
}

struct DenseRange {
  double lo = kInf;
  double hi = 0.0;
  bool ok = true;
  std::string problem;
};

DenseRange dense_abs_range(const Eigenpair& pair, const Box& region, int resolution,
                           bool require_real_positive) {
  DenseRange out;
  const auto d = static_cast<std::size_t>(region.dimension());
  for (const auto& x : grid_points(region, std::vector<int>(d, resolution))) {
    const auto v = evaluate(pair, x);
    if (!v || !std::isfinite(std::abs(*v))) {
      out.ok = false;
      out.problem = "eigenfunction undefined or non-finite on the region";
      return out;
    }
    double a = std::abs(*v);
    if (require_real_positive) {
      if (!(v->real() > 0.0) || std::abs(v->imag()) > 1e-9 * (1.0 + a)) {
        out.ok = false;
        out.problem = "eigenfunction is not real-positive on the region";
        return out;
      }
      a = v->real();
    }
    out.lo = std::min(out.lo, a);
    out.hi = std::max(out.hi, a);
  }
  if (!(out.lo >= 1e-12)) {
    out.ok = false;
    out.problem = "|phi| falls below the 1e-12 floor on the region";
  }
  return out;
}

std::string radius_key(const std::string& prefix, int axis, int sign, double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s.%cx%d.r=%.3e", prefix.c_str(), sign > 0 ? '+' : '-', axis + 1, r);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

TheoremReport verify_eigen_evolution(const Eigenpair& pair, const System& system,
                                     const std::vector<Vector>& starts,
                                     const std::vector<double>& times, double tol,
                                     double integrator_tol) {
  TheoremReport r;
  r.theorem_id = "eigen_evolution";
  r.tolerances["deviation"] = tol;
  r.tolerances["integrator"] = integrator_tol;
  for (double t : times)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("evolution times must be finite and >= 0");
  std::vector<double> grid(times);
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  r.inputs_hash = InputHasher().add(pair).add(system).add(starts).add(times).add(tol).hex();

  struct PerStart {
    enum { ok, undefined, escaped } status = ok;
    double worst = 0.0;
    double worst_t = 0.0;
    std::size_t undefined_along = 0;
    std::vector<std::pair<double, double>> exceed;  // (t, deviation)
  };
  std::vector<PerStart> results(starts.size());
  detail::parallel_for(starts.size(), [&](std::size_t i) {
    auto& res = results[i];
    const auto phi0 = evaluate(pair, starts[i]);
    if (!phi0) {
      res.status = PerStart::undefined;
      return;
    }
    const auto traj = sample_trajectory(system, starts[i], grid, integrator_tol);
    if (traj.escaped) {
      res.status = PerStart::escaped;
      return;
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto phit = evaluate(pair, traj.states[k]);
      if (!phit) {
        ++res.undefined_along;
        continue;
      }
      const double dev = std::abs(*phit - std::exp(pair.lambda * grid[k]) * *phi0) /
                         (1.0 + std::abs(*phi0));
      if (!(dev <= res.worst)) {
        res.worst = std::isnan(dev) ? kInf : dev;
        res.worst_t = grid[k];
      }
      if (!(dev <= tol)) res.exceed.emplace_back(grid[k], dev);
    }
  });

  double max_dev = 0.0;
  std::size_t evaluated = 0, undefined = 0, escaped = 0, undefined_along = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto& res = results[i];
    if (res.status == PerStart::undefined) {
      ++undefined;
      continue;
    }
    if (res.status == PerStart::escaped) {
      ++escaped;
      continue;
    }
    ++evaluated;
    undefined_along += res.undefined_along;
    max_dev = std::max(max_dev, res.worst);
    for (const auto& [t, dev] : res.exceed) r.add_counterexample(starts[i], {t, dev});
  }
  r.set_statistic("max_deviation", max_dev);
  r.set_statistic("starts", static_cast<double>(starts.size()));
  r.set_statistic("evaluated_starts", static_cast<double>(evaluated));
  r.set_statistic("escaped_starts", static_cast<double>(escaped));
  r.set_statistic("undefined_starts", static_cast<double>(undefined));
  r.set_statistic("undefined_along_trajectory", static_cast<double>(undefined_along));
  r.set_statistic("times", static_cast<double>(times.size()));
  if (evaluated == 0) {
    r.mark_inconclusive("no start could be evaluated");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_fixed_point_zero(const std::vector<Eigenpair>& pairs,
                                     const std::vector<FixedPoint>& fixed_points, double tol_lambda,
                                     double tol_phi) {
  TheoremReport r;
  r.theorem_id = "fixed_point_zero";
  r.tolerances["lambda"] = tol_lambda;
  r.tolerances["phi"] = tol_phi;
  InputHasher h;
  for (const auto& p : pairs) h.add(p);
  for (const auto& fp : fixed_points) h.add(fp.location);
  r.inputs_hash = h.hex();

  std::size_t tested = 0, small_rate = 0, degenerate = 0, not_applicable = 0, evaluated = 0;
  double max_abs = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (std::abs(p.lambda) <= tol_lambda) {
      ++small_rate;
      continue;
    }
    if (p.degenerate) {
      ++degenerate;
      continue;
    }
    ++tested;
    for (const auto& fp : fixed_points) {
      const auto a = finite_abs(p, fp.location);
      if (!a) {
        ++not_applicable;
        continue;
      }
      ++evaluated;
      max_abs = std::max(max_abs, *a);
      if (*a > tol_phi)
        r.add_counterexample(fp.location, {static_cast<double>(i), p.lambda.real(), p.lambda.imag(), *a});
    }
  }
  r.set_statistic("max_abs_phi_at_fixed_points", max_abs);
  r.set_statistic("pairs_tested", static_cast<double>(tested));
  r.set_statistic("pairs_excluded_small_rate", static_cast<double>(small_rate));
  r.set_statistic("pairs_excluded_degenerate", static_cast<double>(degenerate));
  r.set_statistic("evaluations", static_cast<double>(evaluated));
  r.set_statistic("not_applicable", static_cast<double>(not_applicable));
  r.set_statistic("fixed_points", static_cast<double>(fixed_points.size()));
  if (evaluated == 0) {
    r.mark_inconclusive(tested == 0 ? "no pair with |lambda| above the rate tolerance"
                                    : "no tested pair is defined at any fixed point");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_level_set_invariance(const Eigenpair& pair, const System& system, double c,
                                         const std::vector<Vector>& starts, double horizon,
                                         double drift_tol, double sample_dt, double integrator_tol) {
  if (!(c > 0.0)) throw ConfigError("level c must be positive");
  if (!(horizon > 0.0) || !(sample_dt > 0.0)) throw ConfigError("horizon and sample step must be positive");
  TheoremReport r;
  r.theorem_id = "level_set_invariance";
  r.tolerances["drift"] = drift_tol;
  r.set_statistic("level_c", c);
  r.set_statistic("horizon", horizon);
  r.inputs_hash =
      InputHasher().add(pair).add(system).add(c).add(starts).add(horizon).add(drift_tol).add(sample_dt).hex();
  if (pair.lambda.real() > 1e-12) {
    r.mark_inconclusive("precondition failed: Re lambda > 0");
    return r;
  }
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / sample_dt - 1e-9));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = std::min(horizon, static_cast<double>(k) * sample_dt);

  struct PerStart {
    enum { ok, outside, escaped } status = ok;
    double worst = 0.0;
    double worst_t = 0.0;
  };
  std::vector<PerStart> results(starts.size());
  detail::parallel_for(starts.size(), [&](std::size_t i) {
    auto& res = results[i];
    const auto a0 = finite_abs(pair, starts[i]);
    if (!a0 || *a0 > c) {
      res.status = PerStart::outside;
      return;
    }
    const auto traj = sample_trajectory(system, starts[i], times, integrator_tol);
    if (traj.escaped) {
      res.status = PerStart::escaped;
      return;
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
      const auto a = finite_abs(pair, traj.states[k]);
      const double exceed = a ? std::max(0.0, *a / c - 1.0) : kInf;
      if (exceed > res.worst) {
        res.worst = exceed;
        res.worst_t = times[k];
      }
    }
  });

  double max_exceed = 0.0;
  std::size_t inside = 0, outside = 0, escaped = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const auto& res = results[i];
    if (res.status == PerStart::outside) {
      ++outside;
      continue;
    }
    if (res.status == PerStart::escaped) {
      ++escaped;
      continue;
    }
    ++inside;
    max_exceed = std::max(max_exceed, res.worst);
    if (res.worst > drift_tol) r.add_counterexample(starts[i], {res.worst_t, res.worst});
  }
  r.set_statistic("max_relative_exceedance", max_exceed);
  r.set_statistic("starts_in_level_set", static_cast<double>(inside));
  r.set_statistic("starts_excluded_outside", static_cast<double>(outside));
  r.set_statistic("escaped_starts", static_cast<double>(escaped));
  if (inside == 0) {
    r.mark_inconclusive("no start lies in the level set");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_escape_time(const Eigenpair& pair, const System& system, const Box& region,
                                const std::vector<Vector>& starts, double tol, int dense_resolution,
                                double integrator_tol) {
  if (static_cast<std::size_t>(region.dimension()) != system.dimension())
    throw ConfigError("region dimension does not match the system");
  if (dense_resolution < 2) throw ConfigError("dense resolution must be at least 2");
  TheoremReport r;
  r.theorem_id = "escape_time";
  r.tolerances["exit_time_relative"] = tol;
  r.inputs_hash = InputHasher().add(pair).add(system).add(region).add(starts).add(tol).hex();
  r.notes.push_back("the exit bound uses 1/Re(lambda)");
  if (!(pair.lambda.real() > 0.0)) {
    r.mark_inconclusive("precondition failed: Re lambda <= 0");
    return r;
  }
  const auto range = dense_abs_range(pair, region, dense_resolution, false);
  if (!range.ok) {
    r.mark_inconclusive("precondition failed: " + range.problem);
    return r;
  }
  const double bound = std::log(range.hi / range.lo) / pair.lambda.real();
  r.set_statistic("epsilon", range.lo);
  r.set_statistic("C", range.hi);
  r.set_statistic("predicted_exit_bound", bound);
  r.set_statistic("rate", pair.lambda.real());
  const double t_max = bound * (1.0 + tol);

  std::vector<std::optional<double>> exits(starts.size());
  detail::parallel_for(starts.size(), [&](std::size_t i) {
    exits[i] = exit_time(system, region, starts[i], t_max, integrator_tol);
  });
  double max_exit = 0.0;
  std::size_t exited = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (exits[i]) {
      ++exited;
      max_exit = std::max(max_exit, *exits[i]);
    } else {
      r.add_counterexample(starts[i], {t_max});
    }
  }
  r.set_statistic("max_exit_time", max_exit);
  r.set_statistic("starts", static_cast<double>(starts.size()));
  r.set_statistic("exited", static_cast<double>(exited));
  if (bound > 0.0) r.set_statistic("max_exit_over_bound", max_exit / bound);
  if (starts.empty()) {
    r.mark_inconclusive("no starts");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

bool has_near_zero_rate(const Eigenpair& pair, double tol) {
  if (pair.lambda_discrete) return std::abs(*pair.lambda_discrete - 1.0) <= tol;
  return std::abs(pair.lambda) <= tol;
}

namespace {

BasinSeparation separation_from_values(const std::vector<double>& values, const BasinGrid& grid) {
  BasinSeparation out;
  std::vector<std::ptrdiff_t> slot(grid.fixed_points.size(), -1);
  for (std::size_t i = 0; i < grid.fixed_points.size(); ++i) {
    if (grid.fixed_points[i].stability != Stability::stable) continue;
    slot[i] = static_cast<std::ptrdiff_t>(out.basins.size());
    out.basins.push_back(i);
  }
  std::vector<double> sums(out.basins.size(), 0.0);
  out.counts.assign(out.basins.size(), 0);
  auto group_of = [&](std::size_t k) -> std::ptrdiff_t {
    const auto& label = grid.labels[k];
    if (!label.fixed_point || *label.fixed_point >= slot.size()) return -1;
    return slot[*label.fixed_point];
  };
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto g = group_of(k);
    if (g < 0) continue;
    if (!std::isfinite(values[k])) {
      ++out.undefined;
      continue;
    }
    sums[static_cast<std::size_t>(g)] += values[k];
    ++out.counts[static_cast<std::size_t>(g)];
  }
  out.means.assign(out.basins.size(), 0.0);
  for (std::size_t b = 0; b < out.basins.size(); ++b)
    if (out.counts[b] > 0) out.means[b] = sums[b] / static_cast<double>(out.counts[b]);

  double ss = 0.0;
  std::size_t n = 0, correct = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto g = group_of(k);
    if (g < 0 || !std::isfinite(values[k])) continue;
    const auto gb = static_cast<std::size_t>(g);
    ss += (values[k] - out.means[gb]) * (values[k] - out.means[gb]);
    ++n;
    std::size_t nearest = gb;
    double best = kInf;
    for (std::size_t b = 0; b < out.basins.size(); ++b) {
      if (out.counts[b] == 0) continue;
      const double dist = std::abs(values[k] - out.means[b]);
      if (dist < best) {
        best = dist;
        nearest = b;
      }
    }
    if (nearest == gb) ++correct;
  }
  out.within_std = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
  out.accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  out.gap = kInf;
  std::size_t populated = 0;
  for (std::size_t a = 0; a < out.basins.size(); ++a) {
    if (out.counts[a] == 0) continue;
    ++populated;
    for (std::size_t b = a + 1; b < out.basins.size(); ++b)
      if (out.counts[b] > 0) out.gap = std::min(out.gap, std::abs(out.means[a] - out.means[b]));
  }
  if (populated < 2) out.gap = 0.0;
  return out;
}

std::vector<double> real_values(const Eigenpair& pair, const std::vector<Vector>& points) {
  std::vector<double> out(points.size());
  detail::parallel_for(points.size(), [&](std::size_t k) {
    const auto v = evaluate(pair, points[k]);
    out[k] = v ? v->real() : std::numeric_limits<double>::quiet_NaN();
  });
  return out;
}

std::size_t populated_basins(const BasinSeparation& s) {
  return static_cast<std::size_t>(std::count_if(s.counts.begin(), s.counts.end(),
                                                [](std::size_t c) { return c > 0; }));
}

}  // namespace

BasinSeparation basin_separation(const Eigenpair& pair, const BasinGrid& grid) {
  return separation_from_values(real_values(pair, grid.points), grid);
}

std::optional<std::size_t> select_invariant_pair(const std::vector<Eigenpair>& pairs,
                                                 const BasinGrid& grid) {
  // Pairs from one fit share a dictionary; evaluate it once.
  std::shared_ptr<const Dictionary> shared;
  for (const auto& p : pairs)
    if (has_near_zero_rate(p) && p.coefficients.size() > 0 && p.dictionary) shared = p.dictionary;
  Matrix psi;
  if (shared) psi = shared->eval_columns(grid.points);

  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (!has_near_zero_rate(p) || p.degenerate) continue;
    std::vector<double> values;
    if (shared && p.dictionary == shared && p.coefficients.size() == psi.cols()) {
      const ComplexVector phi = psi.cast<Complex>() * p.coefficients;
      values.resize(grid.points.size());
      for (std::size_t k = 0; k < values.size(); ++k) values[k] = phi[static_cast<Eigen::Index>(k)].real();
    } else {
      values = real_values(p, grid.points);
    }
    const auto s = separation_from_values(values, grid);
    if (populated_basins(s) < 2 || !(s.gap > 1e-9)) continue;
    const double score = s.gap / std::max(s.within_std, 1e-300);
    if (!best || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

TheoremReport check_basin_constancy(const Eigenpair& pair, const BasinGrid& grid,
                                    double separation_tol) {
  TheoremReport r;
  r.theorem_id = "basin_constancy";
  r.tolerances["separation"] = separation_tol;
  {
    InputHasher h;
    h.add(pair).add(grid.points);
    for (const auto& l : grid.labels) h.add(l.fixed_point ? static_cast<double>(*l.fixed_point) : -1.0);
    r.inputs_hash = h.hex();
  }
  if (!has_near_zero_rate(pair)) {
    r.mark_inconclusive("precondition failed: lambda is not near zero");
    return r;
  }
  const auto values = real_values(pair, grid.points);
  const auto s = separation_from_values(values, grid);
  const std::size_t basins = populated_basins(s);
  r.set_statistic("basins", static_cast<double>(basins));
  r.set_statistic("grid_points", static_cast<double>(grid.points.size()));
  r.set_statistic("undefined_points", static_cast<double>(s.undefined));
  std::size_t used = 0;
  for (auto c : s.counts) used += c;
  r.set_statistic("labelled_points", static_cast<double>(used));
  if (basins < 2) {
    r.mark_inconclusive("fewer than two resolved basins of stable fixed points");
    return r;
  }
  r.set_statistic("within_basin_std", s.within_std);
  r.set_statistic("between_basin_gap", s.gap);
  r.set_statistic("accuracy", s.accuracy);
  for (std::size_t b = 0; b < s.basins.size(); ++b)
    r.set_statistic("basin_mean." + std::to_string(s.basins[b]), s.means[b]);
  double scale = 1.0;
  for (double m : s.means) scale = std::max(scale, std::abs(m));
  if (!(s.gap > 1e-12 * scale)) {
    r.mark_inconclusive("degenerate: basin means coincide (between-basin gap is zero)");
    return r;
  }
  r.set_statistic("std_over_gap", s.within_std / s.gap);
  if (s.within_std > separation_tol * s.gap) {
    std::vector<std::ptrdiff_t> slot(grid.fixed_points.size(), -1);
    for (std::size_t b = 0; b < s.basins.size(); ++b) slot[s.basins[b]] = static_cast<std::ptrdiff_t>(b);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const auto& label = grid.labels[k];
      if (!label.fixed_point || !std::isfinite(values[k])) continue;
      const auto g = slot[*label.fixed_point];
      if (g < 0) continue;
      const double dev = std::abs(values[k] - s.means[static_cast<std::size_t>(g)]);
      if (dev > separation_tol * s.gap) r.add_counterexample(grid.points[k], {values[k], dev / s.gap});
    }
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_zero_on_invariant_manifold(const Eigenpair& pair,
                                               const std::vector<Vector>& manifold_samples,
                                               ManifoldDirection direction, double tol,
                                               const std::vector<Vector>& region_samples,
                                               double bound_cap, const Vector* equilibrium) {
  TheoremReport r;
  r.theorem_id = "zero_on_invariant_manifold";
  r.tolerances["relative_phi"] = tol;
  r.tolerances["bound_cap"] = bound_cap;
  r.inputs_hash = InputHasher()
                      .add(pair)
                      .add(manifold_samples)
                      .add(direction == ManifoldDirection::stable ? "stable" : "unstable")
                      .add(tol)
                      .add(region_samples)
                      .hex();
  const double re = pair.lambda.real();
  if (direction == ManifoldDirection::stable && !(re > kManifoldRateMargin)) {
    r.mark_inconclusive("precondition failed: stable manifold requires Re lambda > 0");
    return r;
  }
  if (direction == ManifoldDirection::unstable && !(re < -kManifoldRateMargin)) {
    r.mark_inconclusive("precondition failed: unstable manifold requires Re lambda < 0");
    return r;
  }
  if (manifold_samples.empty()) {
    r.mark_inconclusive("no manifold samples");
    return r;
  }
  double sup = 0.0;
  for (const auto* set : {&region_samples, &manifold_samples}) {
    for (const auto& x : *set) {
      const auto a = finite_abs(pair, x);
      if (!a || *a > bound_cap) {
        r.set_statistic("sup_abs_phi_before_failure", sup);
        r.mark_inconclusive(
            "precondition failed: eigenfunction unbounded on the sampled region, corollary "
            "inapplicable");
        if (!a) r.notes.push_back("eigenfunction undefined at a sampled point");
        return r;
      }
      sup = std::max(sup, *a);
    }
  }
  r.set_statistic("sup_abs_phi", sup);
  if (!(sup > 0.0)) {
    r.mark_inconclusive("degenerate: eigenfunction vanishes on every sample");
    return r;
  }
  double max_rel = 0.0;
  for (const auto& x : manifold_samples) {
    const double rel = *finite_abs(pair, x) / sup;
    max_rel = std::max(max_rel, rel);
    if (rel > tol) r.add_counterexample(x, {rel});
  }
  r.set_statistic("max_relative_phi_on_manifold", max_rel);
  if (equilibrium) {
    // continuity at the hyperbolic point: phi(x*) should be small too
    if (const auto a = finite_abs(pair, *equilibrium)) r.set_statistic("relative_phi_at_equilibrium", *a / sup);
  }
  r.set_statistic("manifold_samples", static_cast<double>(manifold_samples.size()));
  r.set_statistic("region_samples", static_cast<double>(region_samples.size()));
  r.conclude();
  return r;
}

std::vector<Vector> trace_unstable_manifold(const System& system, const FixedPoint& saddle,
                                            double offset, double horizon,
                                            std::size_t samples_per_branch, double tol) {
  if (!(offset > 0.0) || !(horizon > 0.0) || samples_per_branch == 0)
    throw ConfigError("manifold tracing needs positive offset, horizon and sample count");
  const Matrix jac = system.jacobian(saddle.location);
  const Eigen::EigenSolver<Matrix> es(jac, true);
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const Complex mu = es.eigenvalues()[i];
    if (mu.real() > kNonHyperbolicTol && std::abs(mu.imag()) <= 1e-12 &&
        (best < 0 || mu.real() > es.eigenvalues()[best].real()))
      best = i;
  }
  if (best < 0) throw ConfigError("fixed point has no real unstable direction");
  Vector v = es.eigenvectors().col(best).real();
  v /= v.norm();
  // Deterministic orientation: largest component positive.
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  if (v[k] < 0.0) v = -v;
  const auto times = linspace(0.0, horizon, samples_per_branch);
  std::vector<Vector> out;
  for (double sign : {1.0, -1.0}) {
    const auto traj = sample_trajectory(system, saddle.location + sign * offset * v, times, tol);
    out.insert(out.end(), traj.states.begin(), traj.states.end());
  }
  return out;
}

std::vector<Vector> sample_orbits(const System& system, const std::vector<Vector>& starts,
                                  double horizon, std::size_t samples_per_orbit, double tol) {
  if (!(horizon > 0.0) || samples_per_orbit == 0)
    throw ConfigError("orbit sampling needs a positive horizon and sample count");
  const auto times = linspace(0.0, horizon, samples_per_orbit);
  std::vector<Vector> out;
  for (const auto& x0 : starts) {
    const auto traj = sample_trajectory(system, x0, times, tol);
    out.insert(out.end(), traj.states.begin(), traj.states.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

TheoremReport check_closed_orbit_spectrum(const std::vector<Eigenpair>& pairs, const System& system,
                                          const std::vector<Vector>& orbit_samples,
                                          const std::vector<Vector>& region_samples, double tol_re,
                                          double tol_phi) {
  TheoremReport r;
  r.theorem_id = "closed_orbit_spectrum";
  r.tolerances["real_part"] = tol_re;
  r.tolerances["relative_phi"] = tol_phi;
  {
    InputHasher h;
    h.add(system).add(orbit_samples).add(region_samples);
    for (const auto& p : pairs) h.add(p);
    r.inputs_hash = h.hex();
  }
  if (!system.has_closed_orbits()) {
    r.mark_inconclusive("precondition failed: system '" + system.name() +
                        "' has no bounded closed trajectories");
    return r;
  }
  std::size_t considered = 0, near_axis = 0, off_axis = 0, degenerate = 0;
  double max_re = 0.0, max_rel = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.degenerate) {
      ++degenerate;
      continue;
    }
    ++considered;
    const double re = std::abs(p.lambda.real());
    max_re = std::max(max_re, re);
    if (re <= tol_re) {
      ++near_axis;
      continue;
    }
    ++off_axis;
    double sup = 0.0;
    for (const auto& x : region_samples)
      if (const auto a = finite_abs(p, x)) sup = std::max(sup, *a);
    if (!(sup > 0.0)) continue;
    double worst = 0.0;
    Vector worst_x;
    for (const auto& x : orbit_samples) {
      const auto a = finite_abs(p, x);
      const double rel = a ? *a / sup : kInf;
      if (rel > worst || worst_x.size() == 0) {
        worst = rel;
        worst_x = x;
      }
    }
    max_rel = std::max(max_rel, worst);
    if (worst > tol_phi)
      r.add_counterexample(worst_x, {static_cast<double>(i), p.lambda.real(), p.lambda.imag(), worst});
  }
  r.set_statistic("pairs", static_cast<double>(considered));
  r.set_statistic("pairs_excluded_degenerate", static_cast<double>(degenerate));
  r.set_statistic("pairs_near_imaginary_axis", static_cast<double>(near_axis));
  r.set_statistic("pairs_off_axis", static_cast<double>(off_axis));
  r.set_statistic("fraction_near_imaginary_axis",
                  considered ? static_cast<double>(near_axis) / static_cast<double>(considered) : 0.0);
  r.set_statistic("max_abs_real_part", max_re);
  r.set_statistic("max_relative_orbit_phi", max_rel);
  r.set_statistic("orbit_samples", static_cast<double>(orbit_samples.size()));
  if (considered == 0) {
    r.mark_inconclusive("no non-degenerate pairs");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_blowup_near_stable_point(const Eigenpair& pair, const FixedPoint& fixed_point,
                                             const std::vector<double>& approach_radii,
                                             double threshold) {
  if (approach_radii.empty()) throw ConfigError("approach radii must not be empty");
  for (std::size_t i = 0; i < approach_radii.size(); ++i) {
    if (!(approach_radii[i] > 0.0)) throw ConfigError("approach radii must be positive");
    if (i > 0 && !(approach_radii[i] < approach_radii[i - 1]))
      throw ConfigError("approach radii must be strictly decreasing");
  }
  TheoremReport r;
  r.theorem_id = "blowup_near_stable_point";
  r.tolerances["threshold"] = threshold;
  r.inputs_hash = InputHasher().add(pair).add(fixed_point.location).add(approach_radii).add(threshold).hex();
  if (fixed_point.stability != Stability::stable) {
    r.mark_inconclusive("precondition failed: fixed point is not stable");
    return r;
  }
  if (!(pair.lambda.real() > 0.0)) {
    r.mark_inconclusive("precondition failed: Re lambda <= 0");
    return r;
  }
  const auto d = fixed_point.location.size();
  double min_final = kInf;
  std::vector<std::pair<Vector, std::vector<double>>> pending;
  for (Eigen::Index axis = 0; axis < d; ++axis) {
    for (int sign : {1, -1}) {
      double prev = -1.0;
      for (std::size_t k = 0; k < approach_radii.size(); ++k) {
        const double rad = approach_radii[k];
        Vector x = fixed_point.location;
        x[axis] += sign * rad;
        const auto a = finite_abs(pair, x);
        if (!a || !(*a > 0.0)) {
          r.mark_inconclusive("precondition failed: eigenfunction undefined or zero on the monitored points");
          return r;
        }
        r.set_statistic(radius_key("abs_phi", static_cast<int>(axis), sign, rad), *a);
        if (k > 0 && !(*a > prev)) pending.push_back({x, {rad, *a}});
        prev = *a;
      }
      min_final = std::min(min_final, prev);
      if (prev < threshold) {
        Vector x = fixed_point.location;
        x[axis] += sign * approach_radii.back();
        pending.push_back({x, {approach_radii.back(), prev}});
      }
    }
  }
  for (auto& [x, v] : pending) r.add_counterexample(std::move(x), std::move(v));
  r.set_statistic("min_abs_phi_at_smallest_radius", min_final);
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

TheoremReport check_exit_when_bounded_away(const Eigenpair& pair, const System& system,
                                           const Box& region, const std::vector<Vector>& starts,
                                           double horizon, int dense_resolution,
                                           double integrator_tol) {
  if (static_cast<std::size_t>(region.dimension()) != system.dimension())
    throw ConfigError("region dimension does not match the system");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (dense_resolution < 2) throw ConfigError("dense resolution must be at least 2");
  TheoremReport r;
  r.theorem_id = "exit_when_bounded_away";
  r.tolerances["horizon"] = horizon;
  r.inputs_hash = InputHasher().add(pair).add(system).add(region).add(starts).add(horizon).hex();
  if (!(std::abs(pair.lambda.real()) > 1e-12)) {
    r.mark_inconclusive("precondition failed: Re lambda = 0");
    return r;
  }
  const auto range = dense_abs_range(pair, region, dense_resolution, true);
  if (!range.ok) {
    r.mark_inconclusive("precondition failed: " + range.problem);
    return r;
  }
  r.set_statistic("epsilon", range.lo);
  r.set_statistic("C", range.hi);
  std::vector<std::optional<double>> exits(starts.size());
  detail::parallel_for(starts.size(), [&](std::size_t i) {
    exits[i] = exit_time(system, region, starts[i], horizon, integrator_tol);
  });
  double max_exit = 0.0;
  std::size_t exited = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (exits[i]) {
      ++exited;
      max_exit = std::max(max_exit, *exits[i]);
    } else {
      r.add_counterexample(starts[i], {horizon});
    }
  }
  r.set_statistic("max_exit_time", max_exit);
  r.set_statistic("starts", static_cast<double>(starts.size()));
  r.set_statistic("exited", static_cast<double>(exited));
  if (starts.empty()) {
    r.mark_inconclusive("no starts");
    return r;
  }
  r.conclude();
  return r;
}

// ---------------------------------------------------------------------------

SpectrumComparison compare_spectra(const std::vector<Complex>& generator,
                                   const std::vector<Complex>& discrete, double dt,
                                   double boundary_tol) {
  if (generator.size() != discrete.size())
    throw ConfigError("spectra to compare have different sizes");
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  SpectrumComparison out;
  std::vector<bool> used(discrete.size(), false);
  std::size_t classified = 0, agree = 0;
  for (const Complex& lg : generator) {
    const Complex mapped = std::exp(lg * dt);
    std::size_t best = 0;
    double best_err = kInf;
    for (std::size_t j = 0; j < discrete.size(); ++j) {
      if (used[j]) continue;
      const double err = std::abs(mapped - discrete[j]);
      if (err < best_err) {
        best_err = err;
        best = j;
      }
    }
    used[best] = true;
    SpectrumMatch m;
    m.generator = lg;
    m.discrete = discrete[best];
    m.mapping_error = best_err;
    m.classified = std::abs(lg.real()) > boundary_tol;
    if (m.classified) {
      ++classified;
      const bool inside = std::abs(m.discrete) < 1.0;
      m.class_agrees = (lg.real() < 0.0) == inside;
      if (m.class_agrees) ++agree;
    }
    out.max_mapping_error = std::max(out.max_mapping_error, best_err);
    out.matches.push_back(m);
  }
  out.class_agreement = classified ? static_cast<double>(agree) / static_cast<double>(classified) : 1.0;
  return out;
}

}  // namespace koopcheck
