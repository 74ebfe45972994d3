#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "koopcheck/common.hpp"
#include "koopcheck/dictionaries.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck {

// Raised when an eigenfunction is evaluated outside its domain of definition.
class DomainError : public Error {
 public:
  using Error::Error;
};

enum class EigenSource { discrete, generator, composed, analytic_oracle };
std::string to_string(EigenSource s);

// Closed-form eigenfunction; nullopt outside its domain.
using ClosedForm = std::function<std::optional<Complex>(const Vector& x)>;

// phi(x) = w . psi(x) with continuous-time rate lambda. Dictionary-backed
// pairs carry `coefficients`; oracle and composed pairs carry `closed_form`
// (composed pairs may carry both).
struct Eigenpair {
  Complex lambda{0.0, 0.0};
  std::optional<Complex> lambda_discrete;
  ComplexVector coefficients;
  // Factor that was applied to the raw eigenvector so that sup |phi| = 1 on
  // the fit sample (1 for oracles).
  double normalization = 1.0;
  EigenSource source = EigenSource::discrete;
  bool defective = false;
  // |lambda_d| ~ 0 or phi vanishes on the whole fit sample.
  bool degenerate = false;
  std::shared_ptr<const Dictionary> dictionary;
  ClosedForm closed_form;
  std::string label;
  std::optional<double> composition_residual;
};

std::optional<Complex> evaluate(const Eigenpair& pair, const Vector& x);
// Throws ConfigError on dictionary mismatch, DomainError where phi is undefined.
Complex eval_eigenfunction(const Eigenpair& pair, const Dictionary& dict, const Vector& x);

struct KoopmanModel {
  Matrix K;  // psi(F^dt x) ~ K psi(x)
  std::shared_ptr<const Dictionary> dictionary;
  double dt = 0.0;
  double gamma = 0.0;
  bool default_ridge = false;
  double residual = 0.0;  // relative Frobenius error on the training pairs
  std::vector<Vector> training_states;
};

struct GeneratorModel {
  Matrix L;  // f . grad psi ~ L psi
  std::shared_ptr<const Dictionary> dictionary;
  double gamma = 0.0;
  bool default_ridge = false;
  double residual = 0.0;
  std::vector<Vector> training_states;
};

// gamma = 1e-10 * trace(Gram) / N when not given.
constexpr double kDefaultRidgeScale = 1e-10;

struct RidgeSolution {
  Matrix coefficients;  // targets ~ coefficients * features
  double gamma = 0.0;
  bool default_ridge = false;
};

// Minimises |T - C F|_F^2 + gamma |C|_F^2 through (F F^T + gamma I) C^T = F T^T
// with a column-pivoted QR. gamma = 0 with a rank-deficient Gram throws.
RidgeSolution solve_ridge(const Matrix& targets, const Matrix& features,
                          std::optional<double> gamma);

KoopmanModel fit_edmd(const SnapshotPairs& pairs, std::shared_ptr<const Dictionary> dict,
                      std::optional<double> gamma = std::nullopt);

GeneratorModel fit_generator_edmd(const std::vector<Vector>& samples, const System& system,
                                  std::shared_ptr<const Dictionary> dict,
                                  std::optional<double> gamma = std::nullopt);

// Generator targets f(x_k) . grad psi_i(x_k), one column per sample.
Matrix generator_targets(const Dictionary& dict, const System& system,
                         const std::vector<Vector>& samples);

// Drops pairs whose endpoints fall in different estimated basins.
SnapshotPairs drop_indicator_straddling(const SnapshotPairs& pairs, const Dictionary& dict);
// Drops samples lying within `margin` of an estimated basin boundary.
std::vector<Vector> exclude_indicator_boundary(const std::vector<Vector>& samples,
                                               const Dictionary& dict, double margin);

constexpr double kDefectiveCondition = 1e12;

struct EigenDecomposition {
  std::vector<Eigenpair> pairs;
  bool defective = false;
  double condition_number = 1.0;
  ComplexMatrix schur_vectors;  // filled only when defective
};

// Left eigenvectors of the model matrix, sup-normalised on the training
// sample, sorted by descending Re lambda, ascending |Im lambda|, then w.
EigenDecomposition eig(const KoopmanModel& model);
EigenDecomposition eig(const GeneratorModel& model);

// (phi1^r phi2^s, r lambda1 + s lambda2). When both pairs share a dictionary
// and `samples` is given, coefficients are recovered by least squares and kept
// if the relative residual is below 1e-8.
Eigenpair compose_eigenpairs(const Eigenpair& p1, const Eigenpair& p2, int r, int s,
                             const std::vector<Vector>* samples = nullptr);

Complex discretize_spectrum(Complex lambda, double dt);

double residual(const KoopmanModel& model, const SnapshotPairs& holdout);
double residual(const GeneratorModel& model, const System& system,
                const std::vector<Vector>& holdout);

}  // namespace koopcheck
