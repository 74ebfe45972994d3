#include "koopcheck/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace koopcheck {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

}  // namespace

DormandPrince45::DormandPrince45(OdeRhs rhs, Eigen::Index dimension, IntegratorOptions options)
    : rhs_(std::move(rhs)), dim_(dimension), options_(options) {
  if (dimension <= 0) throw ConfigError("integrator dimension must be positive");
  if (!(options_.abs_tol > 0.0) || !(options_.rel_tol > 0.0))
    throw ConfigError("integrator tolerances must be positive");
  for (Vector* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y_new_, &err_})
    v->resize(dim_);
}

double DormandPrince45::error_norm(const Vector& y, const Vector& y_new) const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc =
        options_.abs_tol + options_.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
    const double r = err_[i] / sc;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(dim_));
}

// Hairer, Norsett & Wanner starting step heuristic.
double DormandPrince45::initial_step(double t, const Vector& y, double direction) {
  rhs_(t, y, k1_);
  k1_valid_ = true;
  double d0 = 0.0, d1 = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc = options_.abs_tol + options_.rel_tol * std::abs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    d1 += (k1_[i] / sc) * (k1_[i] / sc);
  }
  d0 = std::sqrt(d0 / static_cast<double>(dim_));
  d1 = std::sqrt(d1 / static_cast<double>(dim_));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;

  tmp_ = y + direction * h0 * k1_;
  rhs_(t + direction * h0, tmp_, k2_);
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double sc = options_.abs_tol + options_.rel_tol * std::abs(y[i]);
    const double r = (k2_[i] - k1_[i]) / sc;
    d2 += r * r;
  }
  d2 = std::sqrt(d2 / static_cast<double>(dim_)) / h0;
  const double m = std::max(d1, d2);
  const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
  return std::min(100.0 * h0, h1);
}

DormandPrince45::Status DormandPrince45::advance(Vector& y, double& t, double t_target,
                                                 double& h, std::size_t& steps) {
  const double direction = t_target >= t ? 1.0 : -1.0;
  while (direction * (t_target - t) > 0.0) {
    if (steps >= options_.max_steps) return Status::escaped;
    if (!k1_valid_) {
      rhs_(t, y, k1_);
      k1_valid_ = true;
    }
    const double remaining = std::abs(t_target - t);
    bool last = false;
    double step = h;
    if (step >= remaining) {
      step = remaining;
      last = true;
    }
    const double hs = direction * step;

    tmp_ = y + hs * (a21 * k1_);
    rhs_(t + c2 * hs, tmp_, k2_);
    tmp_ = y + hs * (a31 * k1_ + a32 * k2_);
    rhs_(t + c3 * hs, tmp_, k3_);
    tmp_ = y + hs * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t + c4 * hs, tmp_, k4_);
    tmp_ = y + hs * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t + c5 * hs, tmp_, k5_);
    tmp_ = y + hs * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t + hs, tmp_, k6_);
    y_new_ = y + hs * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t + hs, y_new_, k7_);
    err_ = hs * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

    const double err = error_norm(y, y_new_);
    if (!std::isfinite(err)) {
      h = 0.25 * step;
      if (h < 1e-14 * std::max(1.0, std::abs(t))) return Status::escaped;
      continue;
    }
    ++steps;
    if (err <= 1.0) {
      t = last ? t_target : t + hs;
      std::swap(y, y_new_);
      std::swap(k1_, k7_);
      const double factor =
          err == 0.0 ? kMaxFactor
                     : std::clamp(kSafety * std::pow(err, -0.2), kMinFactor, kMaxFactor);
      // A clipped final step says nothing about the natural step size.
      if (!last || factor < 1.0) h = step * factor;
      if (!y.allFinite() || y.lpNorm<Eigen::Infinity>() > options_.escape_bound)
        return Status::escaped;
    } else {
      h = step * std::max(kMinFactor, kSafety * std::pow(err, -0.2));
      if (h < 1e-14 * std::max(1.0, std::abs(t))) return Status::escaped;
    }
  }
  return Status::ok;
}

IntegrationOutcome DormandPrince45::integrate(const Vector& y0, double t0, double t1) {
  if (y0.size() != dim_) throw ConfigError("initial state has wrong dimension");
  IntegrationOutcome out;
  out.state = y0;
  out.time = t0;
  if (t1 == t0) return out;
  k1_valid_ = false;
  const double direction = t1 > t0 ? 1.0 : -1.0;
  double h = initial_step(t0, y0, direction);
  const Status status = advance(out.state, out.time, t1, h, out.steps);
  out.escaped = status == Status::escaped;
  return out;
}

SampledOutcome DormandPrince45::sample(const Vector& y0, double t0,
                                       const std::vector<double>& times) {
  if (y0.size() != dim_) throw ConfigError("initial state has wrong dimension");
  SampledOutcome out;
  out.states.reserve(times.size());
  if (times.empty()) return out;

  const double direction = times.back() >= t0 ? 1.0 : -1.0;
  Vector y = y0;
  double t = t0;
  std::size_t steps = 0;
  k1_valid_ = false;
  double h = 0.0;
  for (double target : times) {
    if (direction * (target - t) < 0.0)
      throw ConfigError("sample times must be monotone in the integration direction");
    if (target != t) {
      if (h == 0.0) h = initial_step(t, y, direction);
      if (advance(y, t, target, h, steps) == Status::escaped) {
        out.escaped = true;
        out.escape_time = t;
        return out;
      }
    }
    out.states.push_back(y);
  }
  return out;
}

}  // namespace koopcheck
