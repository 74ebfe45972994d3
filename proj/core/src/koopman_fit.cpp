#include "koopcheck/koopman_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace koopcheck {

std::string to_string(EigenSource s) {
  switch (s) {
    case EigenSource::discrete: return "discrete";
    case EigenSource::generator: return "generator";
    case EigenSource::composed: return "composed";
    case EigenSource::analytic_oracle: return "analytic-oracle";
  }
  return "unknown";
}

std::optional<Complex> evaluate(const Eigenpair& pair, const Vector& x) {
  if (pair.coefficients.size() > 0 && pair.dictionary) {
    const Vector psi = pair.dictionary->eval(x).values;
    return pair.coefficients.transpose() * psi.cast<Complex>();
  }
  if (pair.closed_form) return pair.closed_form(x);
  throw ConfigError("eigenpair has neither coefficients nor a closed form");
}

Complex eval_eigenfunction(const Eigenpair& pair, const Dictionary& dict, const Vector& x) {
  if (pair.coefficients.size() > 0) {
    if (static_cast<std::size_t>(pair.coefficients.size()) != dict.size() ||
        (pair.dictionary && pair.dictionary->hash() != dict.hash()))
      throw ConfigError("eigenpair was fitted on a different dictionary");
    const Vector psi = dict.eval(x).values;
    return pair.coefficients.transpose() * psi.cast<Complex>();
  }
  if (!x.allFinite()) throw ConfigError("eigenfunction evaluated at a non-finite point");
  const auto value = evaluate(pair, x);
  if (!value) throw DomainError("eigenfunction '" + pair.label + "' is undefined at this point");
  return *value;
}

RidgeSolution solve_ridge(const Matrix& targets, const Matrix& features,
                          std::optional<double> gamma) {
  if (targets.cols() != features.cols()) throw ConfigError("targets and features differ in sample count");
  if (features.cols() == 0) throw ConfigError("no samples to fit");
  const Eigen::Index n = features.rows();
  Matrix gram = features * features.transpose();
  const Matrix cross = features * targets.transpose();  // (F T^T) = (T F^T)^T

  RidgeSolution sol;
  if (gamma) {
    if (!(*gamma >= 0.0) || !std::isfinite(*gamma)) throw ConfigError("ridge gamma must be >= 0");
    sol.gamma = *gamma;
  } else {
    sol.gamma = kDefaultRidgeScale * gram.trace() / static_cast<double>(n);
    sol.default_ridge = true;
  }
  gram.diagonal().array() += sol.gamma;
  const Eigen::ColPivHouseholderQR<Matrix> qr(gram);
  if (sol.gamma == 0.0 && qr.rank() < n)
    throw NumericalError("rank-deficient Gram matrix (rank " + std::to_string(qr.rank()) + " of " +
                         std::to_string(n) + "); use a positive ridge gamma");
  sol.coefficients = qr.solve(cross).transpose();
  if (!sol.coefficients.allFinite()) throw NumericalError("ridge solution is not finite");
  return sol;
}

namespace {

double relative_error(const Matrix& target, const Matrix& prediction) {
  const double denom = target.norm();
  const double num = (target - prediction).norm();
  return denom > 0.0 ? num / denom : num;
}

void require_dictionary(const std::shared_ptr<const Dictionary>& dict, std::size_t d) {
  if (!dict) throw ConfigError("no dictionary given");
  if (dict->dimension() != d) throw ConfigError("dictionary dimension does not match the data");
}

}  // namespace

KoopmanModel fit_edmd(const SnapshotPairs& pairs, std::shared_ptr<const Dictionary> dict,
                      std::optional<double> gamma) {
  if (pairs.size() == 0) throw ConfigError("no snapshot pairs");
  if (pairs.x.size() != pairs.y.size()) throw ConfigError("snapshot pair lists differ in length");
  if (!(pairs.dt > 0.0)) throw ConfigError("snapshot time step must be positive");
  require_dictionary(dict, static_cast<std::size_t>(pairs.x.front().size()));

  const Matrix psi_x = dict->eval_columns(pairs.x);
  const Matrix psi_y = dict->eval_columns(pairs.y);
  auto sol = solve_ridge(psi_y, psi_x, gamma);

  KoopmanModel model;
  model.K = std::move(sol.coefficients);
  model.dictionary = std::move(dict);
  model.dt = pairs.dt;
  model.gamma = sol.gamma;
  model.default_ridge = sol.default_ridge;
  model.residual = relative_error(psi_y, model.K * psi_x);
  model.training_states = pairs.x;
  return model;
}

Matrix generator_targets(const Dictionary& dict, const System& system,
                         const std::vector<Vector>& samples) {
  Matrix targets(static_cast<Eigen::Index>(dict.size()), static_cast<Eigen::Index>(samples.size()));
  const Vector u = Vector::Zero(static_cast<Eigen::Index>(system.control_arity()));
  Vector f(static_cast<Eigen::Index>(system.dimension()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    system.eval_into(samples[k], u, f);
    targets.col(static_cast<Eigen::Index>(k)) = dict.gradient(samples[k]) * f;
  }
  return targets;
}

GeneratorModel fit_generator_edmd(const std::vector<Vector>& samples, const System& system,
                                  std::shared_ptr<const Dictionary> dict,
                                  std::optional<double> gamma) {
  if (samples.empty()) throw ConfigError("no generator samples");
  require_dictionary(dict, system.dimension());
  const Matrix psi = dict->eval_columns(samples);
  const Matrix targets = generator_targets(*dict, system, samples);
  auto sol = solve_ridge(targets, psi, gamma);

  GeneratorModel model;
  model.L = std::move(sol.coefficients);
  model.dictionary = std::move(dict);
  model.gamma = sol.gamma;
  model.default_ridge = sol.default_ridge;
  model.residual = relative_error(targets, model.L * psi);
  model.training_states = samples;
  return model;
}

SnapshotPairs drop_indicator_straddling(const SnapshotPairs& pairs, const Dictionary& dict) {
  if (!dict.has_indicators()) return pairs;
  SnapshotPairs kept = pairs;
  kept.x.clear();
  kept.y.clear();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (dict.indicators()->lookup(pairs.x[k]) != dict.indicators()->lookup(pairs.y[k])) continue;
    kept.x.push_back(pairs.x[k]);
    kept.y.push_back(pairs.y[k]);
  }
  return kept;
}

std::vector<Vector> exclude_indicator_boundary(const std::vector<Vector>& samples,
                                               const Dictionary& dict, double margin) {
  if (!dict.has_indicators()) return samples;
  std::vector<Vector> kept;
  for (const auto& x : samples)
    if (!dict.indicators()->near_boundary(x, margin)) kept.push_back(x);
  return kept;
}

namespace {

bool lex_less(const ComplexVector& a, const ComplexVector& b) {
  for (Eigen::Index i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
    if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
  }
  return a.size() < b.size();
}

EigenDecomposition decompose(const Matrix& m, const std::shared_ptr<const Dictionary>& dict,
                             const std::vector<Vector>& samples, std::optional<double> dt,
                             EigenSource source) {
  if (!m.allFinite()) throw NumericalError("model matrix is not finite");
  const Eigen::EigenSolver<Matrix> solver(m.transpose(), true);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
  const ComplexVector mu = solver.eigenvalues();
  const ComplexMatrix vectors = solver.eigenvectors();

  EigenDecomposition out;
  const Eigen::JacobiSVD<ComplexMatrix> svd(vectors);
  const auto& sv = svd.singularValues();
  out.condition_number = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                 : std::numeric_limits<double>::infinity();
  out.defective = !(out.condition_number <= kDefectiveCondition);
  if (out.defective) {
    const Eigen::ComplexSchur<ComplexMatrix> schur(m.transpose().cast<Complex>());
    out.schur_vectors = schur.matrixU();
  }

  const Matrix psi = dict->eval_columns(samples);
  double psi_scale = 0.0;
  for (Eigen::Index k = 0; k < psi.cols(); ++k) psi_scale = std::max(psi_scale, psi.col(k).norm());

  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    Eigenpair pair;
    pair.source = source;
    pair.dictionary = dict;
    pair.defective = out.defective;
    if (dt) {
      pair.lambda_discrete = mu[i];
      const double modulus = std::max(std::abs(mu[i]), 1e-300);
      pair.lambda = Complex(std::log(modulus), std::arg(mu[i])) / *dt;
      pair.degenerate = std::abs(mu[i]) < 1e-12;
    } else {
      pair.lambda = mu[i];
    }

    ComplexVector w = vectors.col(i);
    const ComplexVector values = psi.transpose().cast<Complex>() * w;
    const double sup = values.cwiseAbs().maxCoeff();
    if (!(sup > 1e-12 * w.norm() * psi_scale)) {
      pair.degenerate = true;
      pair.coefficients = w;
      pair.normalization = 1.0;
    } else {
      // First sample attaining the sup fixes the phase: phi there is real positive.
      Eigen::Index anchor = 0;
      for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (std::abs(values[k]) >= (1.0 - 1e-9) * sup) {
          anchor = k;
          break;
        }
      }
      const Complex factor = std::abs(values[anchor]) / (values[anchor] * sup);
      pair.coefficients = w * factor;
      pair.normalization = std::abs(factor);
    }
    out.pairs.push_back(std::move(pair));
  }

  std::sort(out.pairs.begin(), out.pairs.end(), [](const Eigenpair& a, const Eigenpair& b) {
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
    const double ia = std::abs(a.lambda.imag()), ib = std::abs(b.lambda.imag());
    if (ia != ib) return ia < ib;
    return lex_less(a.coefficients, b.coefficients);
  });
  return out;
}

}  // namespace

EigenDecomposition eig(const KoopmanModel& model) {
  return decompose(model.K, model.dictionary, model.training_states, model.dt,
                   EigenSource::discrete);
}

EigenDecomposition eig(const GeneratorModel& model) {
  return decompose(model.L, model.dictionary, model.training_states, std::nullopt,
                   EigenSource::generator);
}

namespace {

Complex int_pow(Complex z, int n) {
  Complex r(1.0, 0.0);
  for (int i = 0; i < n; ++i) r *= z;
  return r;
}

}  // namespace

Eigenpair compose_eigenpairs(const Eigenpair& p1, const Eigenpair& p2, int r, int s,
                             const std::vector<Vector>* samples) {
  if (r < 0 || s < 0) throw ConfigError("composition exponents must be non-negative");
  const bool d1 = p1.dictionary != nullptr, d2 = p2.dictionary != nullptr;
  if (d1 != d2 || (d1 && p1.dictionary->hash() != p2.dictionary->hash()))
    throw ConfigError("eigenpairs belong to incompatible dictionaries");

  Eigenpair out;
  out.source = EigenSource::composed;
  out.lambda = static_cast<double>(r) * p1.lambda + static_cast<double>(s) * p2.lambda;
  if (p1.lambda_discrete && p2.lambda_discrete)
    out.lambda_discrete = int_pow(*p1.lambda_discrete, r) * int_pow(*p2.lambda_discrete, s);
  out.dictionary = p1.dictionary;
  out.label = "(" + p1.label + ")^" + std::to_string(r) + "*(" + p2.label + ")^" + std::to_string(s);

  if (r == 0 && s == 0) {
    out.closed_form = [](const Vector&) -> std::optional<Complex> { return Complex(1.0, 0.0); };
  } else {
    out.closed_form = [p1, p2, r, s](const Vector& x) -> std::optional<Complex> {
      Complex v(1.0, 0.0);
      if (r > 0) {
        const auto a = evaluate(p1, x);
        if (!a) return std::nullopt;
        v *= int_pow(*a, r);
      }
      if (s > 0) {
        const auto b = evaluate(p2, x);
        if (!b) return std::nullopt;
        v *= int_pow(*b, s);
      }
      return v;
    };
  }

  if (d1 && samples && !samples->empty()) {
    const Matrix psi_t = p1.dictionary->eval_columns(*samples).transpose();
    ComplexVector values(static_cast<Eigen::Index>(samples->size()));
    for (std::size_t k = 0; k < samples->size(); ++k) {
      const auto v = out.closed_form((*samples)[k]);
      if (!v) throw DomainError("composed eigenfunction undefined on a sample");
      values[static_cast<Eigen::Index>(k)] = *v;
    }
    const Eigen::ColPivHouseholderQR<Matrix> qr(psi_t);
    const Vector re = qr.solve(Vector(values.real()));
    const Vector im = qr.solve(Vector(values.imag()));
    ComplexVector coeffs(re.size());
    coeffs.real() = re;
    coeffs.imag() = im;
    const ComplexVector fitted = psi_t.cast<Complex>() * coeffs;
    const double denom = values.norm();
    const double res = denom > 0.0 ? (fitted - values).norm() / denom : (fitted - values).norm();
    out.composition_residual = res;
    if (res <= 1e-8) out.coefficients = std::move(coeffs);
  }
  return out;
}

Complex discretize_spectrum(Complex lambda, double dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  return std::exp(lambda * dt);
}

double residual(const KoopmanModel& model, const SnapshotPairs& holdout) {
  if (holdout.size() == 0) throw ConfigError("empty holdout set");
  const Matrix psi_x = model.dictionary->eval_columns(holdout.x);
  const Matrix psi_y = model.dictionary->eval_columns(holdout.y);
  return relative_error(psi_y, model.K * psi_x);
}

double residual(const GeneratorModel& model, const System& system,
                const std::vector<Vector>& holdout) {
  if (holdout.empty()) throw ConfigError("empty holdout set");
  const Matrix psi = model.dictionary->eval_columns(holdout);
  return relative_error(generator_targets(*model.dictionary, system, holdout), model.L * psi);
}

}  // namespace koopcheck
