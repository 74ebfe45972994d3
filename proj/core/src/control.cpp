#include "koopcheck/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "koopcheck/koopman_fit.hpp"

namespace koopcheck {

namespace {

double int_pow(double base, int exp) {
  double v = 1.0;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

// All exponent vectors of length d with total degree in [lo, hi], graded then
// reverse-lexicographic, matching the monomial dictionary order.
std::vector<std::vector<int>> exponent_set(std::size_t d, int lo, int hi) {
  std::vector<std::vector<int>> out;
  for (int deg = lo; deg <= hi; ++deg) {
    std::vector<int> e(d, 0);
    // Enumerate compositions of deg into d parts in decreasing lex order.
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
      if (pos + 1 == d) {
        e[pos] = left;
        out.push_back(e);
        return;
      }
      for (int k = left; k >= 0; --k) {
        e[pos] = k;
        rec(pos + 1, left - k);
      }
    };
    if (d > 0) rec(0, deg);
  }
  return out;
}

Box clamp_box_dimension(const Box& b, std::size_t d, const char* what) {
  if (static_cast<std::size_t>(b.dimension()) != d)
    throw ConfigError(std::string(what) + " box has the wrong dimension");
  return b;
}

Vector clamp_to(const Box& box, const Vector& x) {
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

}  // namespace

// ---------------------------------------------------------------------------

ControlDictionary::ControlDictionary(std::size_t state_dim, std::size_t input_dim,
                                     std::vector<Entry> entries)
    : state_dim_(state_dim), input_dim_(input_dim), entries_(std::move(entries)) {
  if (state_dim_ == 0 || input_dim_ == 0) throw ConfigError("control dictionary needs state and input dimensions");
  if (entries_.empty()) throw ConfigError("control dictionary has no entries");
  for (const auto& e : entries_) {
    if (e.input_exponents.size() != input_dim_ || e.state_exponents.size() != state_dim_)
      throw ConfigError("control dictionary entry has the wrong exponent length");
    int input_degree = 0;
    for (int k : e.input_exponents) {
      if (k < 0) throw ConfigError("negative exponent in control dictionary");
      input_degree += k;
    }
    for (int k : e.state_exponents)
      if (k < 0) throw ConfigError("negative exponent in control dictionary");
    // Entries must vanish at u = 0.
    if (input_degree < 1) throw ConfigError("control observable without an input factor");
  }
}

Vector ControlDictionary::eval(const Vector& x, const Vector& u) const {
  if (static_cast<std::size_t>(x.size()) != state_dim_ || static_cast<std::size_t>(u.size()) != input_dim_)
    throw ConfigError("control dictionary evaluated with wrong dimensions");
  Vector out(static_cast<Eigen::Index>(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    double v = 1.0;
    for (std::size_t j = 0; j < input_dim_; ++j) v *= int_pow(u[static_cast<Eigen::Index>(j)], entries_[i].input_exponents[j]);
    for (std::size_t j = 0; j < state_dim_; ++j) v *= int_pow(x[static_cast<Eigen::Index>(j)], entries_[i].state_exponents[j]);
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

nlohmann::json ControlDictionary::to_json() const {
  nlohmann::json j;
  j["state_dimension"] = state_dim_;
  j["input_dimension"] = input_dim_;
  auto& list = j["entries"] = nlohmann::json::array();
  for (const auto& e : entries_) list.push_back({{"input", e.input_exponents}, {"state", e.state_exponents}});
  return j;
}

ControlDictionary build_control_dictionary(std::size_t state_dim, std::size_t input_dim,
                                           int state_degree, int input_degree) {
  if (state_degree < 0 || input_degree < 1) throw ConfigError("control dictionary degrees out of range");
  std::vector<ControlDictionary::Entry> entries;
  for (const auto& a : exponent_set(input_dim, 1, input_degree))
    for (const auto& b : exponent_set(state_dim, 0, state_degree)) entries.push_back({a, b});
  if (entries.size() > kDictionarySizeCap) throw ConfigError("control dictionary exceeds the size cap");
  return ControlDictionary(state_dim, input_dim, std::move(entries));
}

std::vector<ControlSample> sample_control_data(const Box& state_box, const Box& input_box,
                                               std::size_t n, double zero_fraction,
                                               std::uint64_t seed) {
  if (!(zero_fraction > 0.0 && zero_fraction < 1.0))
    throw ConfigError("zero-input fraction must lie strictly between 0 and 1");
  Rng rng(seed);
  const auto n_zero = static_cast<std::size_t>(std::llround(zero_fraction * static_cast<double>(n)));
  std::vector<ControlSample> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    ControlSample s;
    s.x = uniform_in_box(rng, state_box);
    s.u = k < n_zero ? Vector::Zero(input_box.dimension()) : uniform_in_box(rng, input_box);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------

KoopmanControlModel fit_control_model(const System& system, const std::vector<ControlSample>& samples,
                                      std::shared_ptr<const Dictionary> state_dictionary,
                                      std::shared_ptr<const ControlDictionary> control_dictionary,
                                      std::optional<double> gamma) {
  if (!state_dictionary || !control_dictionary) throw ConfigError("control model needs both dictionaries");
  if (system.control_arity() == 0) throw ConfigError("system '" + system.name() + "' takes no input");
  if (state_dictionary->dimension() != system.dimension() ||
      control_dictionary->state_dimension() != system.dimension() ||
      control_dictionary->input_dimension() != system.control_arity())
    throw ConfigError("dictionary dimensions do not match the controlled system");
  std::size_t zero = 0;
  std::size_t excited = 0;
  for (const auto& s : samples) (s.u.cwiseAbs().maxCoeff() == 0.0 ? zero : excited) += 1;
  if (excited == 0)
    throw ConfigError("input data has no excitation (u = 0 everywhere): L_xu is not identifiable");
  if (zero == 0) throw ConfigError("input data has no u = 0 samples: L_x is not identifiable");

  const auto n = static_cast<Eigen::Index>(state_dictionary->size());
  const auto m = static_cast<Eigen::Index>(control_dictionary->size());
  const auto k = static_cast<Eigen::Index>(samples.size());
  Matrix features(n + m, k);
  Matrix targets(n, k);
  Vector f(static_cast<Eigen::Index>(system.dimension()));
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& s = samples[static_cast<std::size_t>(c)];
    if (!all_finite(s.x) || !all_finite(s.u)) throw ConfigError("non-finite control sample");
    state_dictionary->eval_into(s.x, features.col(c).head(n));
    features.col(c).tail(m) = control_dictionary->eval(s.x, s.u);
    system.eval_into(s.x, s.u, f);
    targets.col(c) = state_dictionary->gradient(s.x) * f;
  }
  const auto sol = solve_ridge(targets, features, gamma);
  KoopmanControlModel model;
  model.Lx = sol.coefficients.leftCols(n);
  model.Lxu = sol.coefficients.rightCols(m);
  model.state_dictionary = std::move(state_dictionary);
  model.control_dictionary = std::move(control_dictionary);
  model.gamma = sol.gamma;
  model.default_ridge = sol.default_ridge;
  const double denom = targets.norm();
  model.residual = (targets - sol.coefficients * features).norm() / (denom > 0.0 ? denom : 1.0);
  if (!model.Lx.allFinite() || !model.Lxu.allFinite()) throw NumericalError("control fit is not finite");
  return model;
}

LiftedDecomposition eigen_decompose_control(const KoopmanControlModel& model, double null_threshold) {
  if (!(null_threshold >= 0.0)) throw ConfigError("null threshold must be non-negative");
  const Eigen::EigenSolver<Matrix> es(model.Lx, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of L_x failed");
  LiftedDecomposition out;
  out.Q = es.eigenvectors();
  out.D = es.eigenvalues();
  const Eigen::JacobiSVD<ComplexMatrix> svd(out.Q);
  const auto& sv = svd.singularValues();
  out.condition_number = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(out.condition_number <= kDefectiveCondition))
    throw NumericalError("L_x is numerically defective (eigenvector condition number above 1e12)");
  out.Q_inv = out.Q.partialPivLu().inverse();
  out.B_tilde = out.Q_inv * model.Lxu.cast<Complex>();
  const ComplexMatrix rebuilt = out.Q * out.D.asDiagonal() * out.Q_inv;
  const double norm = model.Lx.norm();
  out.reconstruction_error = (rebuilt - model.Lx.cast<Complex>()).norm() / (norm > 0.0 ? norm : 1.0);
  out.null_threshold = null_threshold;
  for (Eigen::Index i = 0; i < out.D.size(); ++i)
    if (std::abs(out.D[i]) <= null_threshold) out.null_rows.push_back(static_cast<std::size_t>(i));
  return out;
}

double null_rate_bound(const LiftedDecomposition& decomposition, double input_bound) {
  if (!(input_bound >= 0.0) || !std::isfinite(input_bound)) throw ConfigError("input bound must be finite and >= 0");
  if (decomposition.null_rows.empty())
    throw ConfigError("lifted model has no lambda = 0 mode; the crossing experiment does not apply");
  double worst = 0.0;
  for (auto r : decomposition.null_rows)
    worst = std::max(worst, decomposition.B_tilde.row(static_cast<Eigen::Index>(r)).norm());
  return worst * input_bound;
}

InputBoundEstimate estimate_input_bound(const ControlDictionary& dictionary, const Box& state_box,
                                        const Box& input_box, std::size_t samples, std::uint64_t seed) {
  clamp_box_dimension(state_box, dictionary.state_dimension(), "state");
  clamp_box_dimension(input_box, dictionary.input_dimension(), "input");
  if (samples == 0) throw ConfigError("input bound needs at least one sample");
  Rng rng(seed);
  InputBoundEstimate out;
  out.samples = samples;
  out.seed = seed;
  for (std::size_t k = 0; k < samples; ++k) {
    const Vector x = uniform_in_box(rng, state_box);
    const Vector u = uniform_in_box(rng, input_box);
    out.empirical_sup = std::max(out.empirical_sup, dictionary.eval(x, u).norm());
  }
  out.bound = 1.1 * out.empirical_sup;
  return out;
}

// ---------------------------------------------------------------------------

InputSchedule::InputSchedule(std::vector<double> starts, std::vector<Vector> values, std::string description)
    : starts_(std::move(starts)), values_(std::move(values)), description_(std::move(description)) {
  if (starts_.empty() || starts_.size() != values_.size())
    throw ConfigError("input schedule needs one value per segment start");
  if (starts_.front() != 0.0) throw ConfigError("input schedule must start at t = 0");
  for (std::size_t i = 1; i < starts_.size(); ++i)
    if (!(starts_[i] > starts_[i - 1])) throw ConfigError("input schedule starts must increase");
  for (const auto& v : values_) {
    if (v.size() != values_.front().size() || v.size() == 0) throw ConfigError("input schedule values differ in size");
    if (!all_finite(v)) throw ConfigError("input schedule values must be finite");
  }
}

InputSchedule InputSchedule::constant(const Vector& value) {
  std::string desc = "constant u =";
  char buf[32];
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %g", value[i]);
    desc += buf;
  }
  return InputSchedule({0.0}, {value}, desc);
}

Vector InputSchedule::at(double t) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  const auto idx = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
  return values_[idx];
}

std::size_t InputSchedule::input_dimension() const {
  return values_.empty() ? 0 : static_cast<std::size_t>(values_.front().size());
}

double InputSchedule::sup_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s = std::max(s, v.cwiseAbs().maxCoeff());
  return s;
}

nlohmann::json InputSchedule::to_json() const {
  nlohmann::json j;
  j["description"] = description_;
  auto& segs = j["segments"] = nlohmann::json::array();
  for (std::size_t i = 0; i < starts_.size(); ++i)
    segs.push_back({{"start", starts_[i]},
                    {"value", std::vector<double>(values_[i].data(), values_[i].data() + values_[i].size())}});
  return j;
}

InputSchedule InputSchedule::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("input schedule must be an object");
  for (const auto& [k, v] : j.items())
    if (k != "kind" && k != "value" && k != "segments" && k != "description")
      throw ConfigError("unknown key '" + k + "' in input schedule");
  auto vec = [](const nlohmann::json& a) {
    if (!a.is_array() || a.empty()) throw ConfigError("input value must be a non-empty array");
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ConfigError("input value entries must be numbers");
      v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    }
    return v;
  };
  const std::string kind = j.value("kind", std::string("piecewise"));
  InputSchedule s;
  if (kind == "constant") {
    if (!j.contains("value")) throw ConfigError("constant schedule needs 'value'");
    s = constant(vec(j.at("value")));
  } else if (kind == "piecewise") {
    if (!j.contains("segments") || !j.at("segments").is_array())
      throw ConfigError("piecewise schedule needs a 'segments' array");
    std::vector<double> starts;
    std::vector<Vector> values;
    for (const auto& seg : j.at("segments")) {
      if (!seg.is_object() || !seg.contains("start") || !seg.contains("value") || !seg.at("start").is_number())
        throw ConfigError("schedule segment needs numeric 'start' and 'value'");
      starts.push_back(seg.at("start").get<double>());
      values.push_back(vec(seg.at("value")));
    }
    s = InputSchedule(std::move(starts), std::move(values), "piecewise constant");
  } else {
    throw ConfigError("unknown schedule kind '" + kind + "'");
  }
  if (j.contains("description")) {
    if (!j.at("description").is_string()) throw ConfigError("schedule description must be a string");
    s.description_ = j.at("description").get<std::string>();
  }
  return s;
}

// ---------------------------------------------------------------------------

namespace {

// Classic RK4 on the diagonal lifted system phi' = D phi + B~ g(t, phi). The
// update is a convex combination of stage derivatives, so for a null row
// (D_rr = 0) |phi_r(t+h) - phi_r(t)| <= h * max_stage |B~_r g| holds exactly.
template <class Forcing>
void rk4_step(ComplexVector& phi, double t, double h, const ComplexVector& D, const Forcing& forcing) {
  auto deriv = [&](double s, const ComplexVector& p) -> ComplexVector {
    return D.asDiagonal() * p + forcing(s, p);
  };
  const ComplexVector k1 = deriv(t, phi);
  const ComplexVector k2 = deriv(t + 0.5 * h, phi + 0.5 * h * k1);
  const ComplexVector k3 = deriv(t + 0.5 * h, phi + 0.5 * h * k2);
  const ComplexVector k4 = deriv(t + h, phi + h * k3);
  phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<std::size_t> state_coordinate_entries(const Dictionary& dict) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < dict.dimension(); ++j) {
    std::vector<int> e(dict.dimension(), 0);
    e[j] = 1;
    out.push_back(dict.index_of_monomial(e));
  }
  return out;
}

std::optional<std::size_t> indicator_entry(const Dictionary& dict, std::size_t basin) {
  for (std::size_t i = 0; i < dict.entries().size(); ++i)
    if (const auto* ind = std::get_if<IndicatorObservable>(&dict.entries()[i]); ind && ind->basin == basin) return i;
  return std::nullopt;
}

}  // namespace

ExperimentReport basin_crossing_experiment(const System& true_system, const KoopmanControlModel& model,
                                           const LiftedDecomposition& decomposition,
                                           const CrossingSetup& setup) {
  const auto& dict = *model.state_dictionary;
  const auto& cdict = *model.control_dictionary;
  if (setup.schedule.input_dimension() != true_system.control_arity())
    throw ConfigError("input schedule dimension does not match the system");
  if (static_cast<std::size_t>(setup.x0.size()) != true_system.dimension())
    throw ConfigError("initial state dimension does not match the system");
  if (!(setup.horizon > 0.0)) throw ConfigError("experiment horizon must be positive");
  if (!dict.has_indicators()) throw ConfigError("crossing experiment needs an indicator-augmented state dictionary");
  clamp_box_dimension(setup.input_box, true_system.control_arity(), "input");
  clamp_box_dimension(setup.state_box, true_system.dimension(), "state");
  // Schedule values must be admissible so that the input bound B covers them.
  for (const auto& v : setup.schedule.values())
    if (!setup.input_box.contains(v)) throw ConfigError("input schedule leaves the admissible input box");

  const double bound = null_rate_bound(decomposition, setup.input_bound.bound);
  ExperimentReport rep;
  rep.scenario = setup.scenario;
  rep.schedule_description = setup.schedule.description();
  rep.schedule = setup.schedule.to_json();
  rep.x0 = setup.x0;
  rep.horizon = setup.horizon;
  rep.input_bound = setup.input_bound.bound;
  rep.input_bound_empirical_sup = setup.input_bound.empirical_sup;
  rep.input_bound_samples = setup.input_bound.samples;
  rep.null_rate_bound = bound;
  rep.null_rows = decomposition.null_rows;
  rep.model_residual = model.residual;
  rep.reconstruction_error = decomposition.reconstruction_error;

  // (a) true trajectory on the crossing grid, labelled by the uncontrolled flow.
  const auto steps = static_cast<std::size_t>(std::llround(setup.horizon / kCrossingGrid));
  std::vector<double> times(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) times[k] = static_cast<double>(k) * kCrossingGrid;
  const InputSignal input = [&setup](double t, std::span<double> u) {
    const Vector v = setup.schedule.at(t);
    std::copy(v.data(), v.data() + v.size(), u.begin());
  };
  const auto truth = sample_trajectory(true_system, setup.x0, times, setup.tol, input);
  if (truth.escaped) throw NumericalError("true controlled trajectory escaped");

  auto label_of = [&](const Vector& x) {
    return classify_basin(true_system, x, setup.fixed_points, setup.basin_horizon, setup.capture_radius, setup.tol);
  };
  const BasinLabel start = label_of(setup.x0);
  if (!start.fixed_point || setup.fixed_points[*start.fixed_point].stability != Stability::stable)
    throw ConfigError("initial state does not lie in the basin of a stable fixed point");
  rep.start_basin = *start.fixed_point;
  std::size_t crossing_index = 0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(label_of(truth.states[k]) == start)) {
      crossing_index = k;
      rep.crossing_time = times[k];
      break;
    }
  }

  std::optional<std::size_t> tracked;
  if (rep.crossing_time) {
    const auto after = label_of(truth.states[crossing_index]);
    if (after.fixed_point && indicator_entry(dict, *after.fixed_point)) tracked = *after.fixed_point;
  }
  if (!tracked) {
    for (std::size_t i = 0; i < setup.fixed_points.size(); ++i) {
      if (i != rep.start_basin && setup.fixed_points[i].stability == Stability::stable && indicator_entry(dict, i)) {
        tracked = i;
        break;
      }
    }
  }
  if (!tracked) throw ConfigError("state dictionary has no indicator for a second basin");
  rep.indicator_basin = *tracked;
  const std::size_t ind = *indicator_entry(dict, *tracked);

  // (b) lifted rollout in eigen-coordinates; null rows evolve by forcing only.
  ComplexVector D = decomposition.D;
  for (auto r : decomposition.null_rows) D[static_cast<Eigen::Index>(r)] = Complex(0.0, 0.0);
  const auto xs = state_coordinate_entries(dict);
  auto reconstruct_x = [&](const ComplexVector& phi) {
    const Vector psi = (decomposition.Q * phi).real();
    Vector x(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t j = 0; j < xs.size(); ++j) x[static_cast<Eigen::Index>(j)] = psi[static_cast<Eigen::Index>(xs[j])];
    return x;
  };
  auto forcing = [&](double t, const ComplexVector& phi) -> ComplexVector {
    Vector x = reconstruct_x(phi);
    if (!all_finite(x)) x = setup.state_box.center();
    const Vector g = cdict.eval(clamp_to(setup.state_box, x), setup.schedule.at(t));
    return decomposition.B_tilde * g.cast<Complex>();
  };
  ComplexVector phi = decomposition.Q_inv * dict.eval(setup.x0).values.cast<Complex>();
  const ComplexVector phi0 = phi;
  constexpr int kSubsteps = 10;
  const double h = kCrossingGrid / kSubsteps;

  auto null_change = [&](const ComplexVector& p) {
    double c = 0.0;
    for (auto r : decomposition.null_rows) {
      const auto i = static_cast<Eigen::Index>(r);
      c = std::max(c, std::abs(p[i] - phi0[i]));
    }
    return c;
  };

  ComplexVector prev = phi;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0) {
      prev = phi;
      for (int s = 0; s < kSubsteps; ++s) rk4_step(phi, times[k - 1] + s * h, h, D, forcing);
      if (!phi.allFinite() || phi.cwiseAbs().maxCoeff() > kEscapeBound) {
        rep.lifted_truncated = true;
        break;
      }
      for (auto r : decomposition.null_rows) {
        const auto i = static_cast<Eigen::Index>(r);
        rep.max_realized_null_rate =
            std::max(rep.max_realized_null_rate, std::abs(phi[i] - prev[i]) / (times[k] - times[k - 1]));
      }
    }
    CrossingSample row;
    row.t = times[k];
    row.x_true = truth.states[k];
    const Vector psi_lifted = (decomposition.Q * phi).real();
    row.x_lifted = reconstruct_x(phi);
    row.indicator_true = dict.eval(truth.states[k]).values[static_cast<Eigen::Index>(ind)];
    row.indicator_lifted = psi_lifted[static_cast<Eigen::Index>(ind)];
    row.null_change = null_change(phi);
    rep.max_indicator_error = std::max(rep.max_indicator_error, std::abs(row.indicator_true - row.indicator_lifted));
    rep.series.push_back(std::move(row));
  }

  // (c) certificate and (d) the prediction gap at the crossing.
  if (rep.crossing_time && crossing_index < rep.series.size()) {
    const auto& at = rep.series[crossing_index];
    rep.null_change_at_crossing = at.null_change;
    rep.certified_change_at_crossing = bound * *rep.crossing_time;
    rep.indicator_error_at_crossing = std::abs(at.indicator_true - at.indicator_lifted);
  } else {
    rep.null_change_at_crossing = rep.series.empty() ? 0.0 : rep.series.back().null_change;
    rep.certified_change_at_crossing = bound * (rep.series.empty() ? 0.0 : rep.series.back().t);
  }
  rep.certified = rep.null_change_at_crossing <= rep.certified_change_at_crossing * (1.0 + kCertificateSlack) &&
                  rep.max_realized_null_rate <= bound * (1.0 + kCertificateSlack);
  return rep;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["schedule"] = schedule;
  j["schedule_description"] = schedule_description;
  j["x0"] = std::vector<double>(x0.data(), x0.data() + x0.size());
  j["horizon"] = horizon;
  if (crossing_time) j["t_c"] = *crossing_time;
  j["crossed"] = crossing_time.has_value();
  j["start_basin"] = start_basin;
  j["indicator_basin"] = indicator_basin;
  j["input_bound"] = {{"B", input_bound},
                      {"empirical_sup", input_bound_empirical_sup},
                      {"samples", input_bound_samples},
                      {"inflation", 1.1}};
  j["null_rows"] = null_rows;
  j["null_rate_bound"] = null_rate_bound;
  j["certificate"] = {{"null_change", null_change_at_crossing},
                      {"bound", certified_change_at_crossing},
                      {"max_realized_rate", max_realized_null_rate},
                      {"relative_slack", kCertificateSlack},
                      {"holds", certified}};
  if (indicator_error_at_crossing) j["indicator_error_at_t_c"] = *indicator_error_at_crossing;
  j["max_indicator_error"] = max_indicator_error;
  j["model_residual"] = model_residual;
  j["reconstruction_error"] = reconstruction_error;
  j["lifted_truncated"] = lifted_truncated;
  j["samples"] = series.size();
  return j;
}

void write_crossing_csv(std::ostream& os, const ExperimentReport& report) {
  const auto d = report.x0.size();
  os << "t";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x" << (i + 1) << "_true";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x" << (i + 1) << "_lifted";
  os << ",indicator_true,indicator_lifted,indicator_error,null_change\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    os << buf;
  };
  for (const auto& row : report.series) {
    std::snprintf(buf, sizeof buf, "%.17g", row.t);
    os << buf;
    for (Eigen::Index i = 0; i < d; ++i) put(row.x_true[i]);
    for (Eigen::Index i = 0; i < d; ++i) put(row.x_lifted[i]);
    put(row.indicator_true);
    put(row.indicator_lifted);
    put(std::abs(row.indicator_true - row.indicator_lifted));
    put(row.null_change);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

LiftedTrajectory feedback_rollout(const KoopmanControlModel& model,
                                  const LiftedDecomposition& decomposition, const Matrix& gain,
                                  const Vector& x0, double horizon, std::size_t samples) {
  const auto n = model.Lx.rows();
  const auto m = model.Lxu.cols();
  if (gain.rows() != m || gain.cols() != n) throw ConfigError("feedback gain must be M x N");
  if (static_cast<std::size_t>(x0.size()) != model.state_dictionary->dimension())
    throw ConfigError("initial state dimension does not match the dictionary");
  if (!(horizon > 0.0) || samples < 2) throw ConfigError("rollout needs a positive horizon and >= 2 samples");
  const ComplexMatrix closing = decomposition.B_tilde * gain.cast<Complex>() * decomposition.Q;
  auto forcing = [&](double, const ComplexVector& p) -> ComplexVector { return -(closing * p); };
  LiftedTrajectory out;
  ComplexVector phi = decomposition.Q_inv * model.state_dictionary->eval(x0).values.cast<Complex>();
  const double dt = horizon / static_cast<double>(samples - 1);
  const int sub = std::max(1, static_cast<int>(std::ceil(dt / 1e-3)));
  const double h = dt / sub;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0)
      for (int s = 0; s < sub; ++s) rk4_step(phi, t - dt + s * h, h, decomposition.D, forcing);
    if (!phi.allFinite() || phi.cwiseAbs().maxCoeff() > kEscapeBound) {
      out.truncated = true;
      break;
    }
    out.times.push_back(t);
    out.psi.push_back((decomposition.Q * phi).real());
  }
  return out;
}

}  // namespace koopcheck
