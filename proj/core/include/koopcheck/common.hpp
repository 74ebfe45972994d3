#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace koopcheck {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

// Error hierarchy. The CLI maps ConfigError to exit code 2 and every other
// Error to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad names, parameters, dimensions or preconditions supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Rank deficiency, defective eigenproblems, non-finite intermediate values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Axis-aligned box [lower, upper] in R^d.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);

  [[nodiscard]] Eigen::Index dimension() const { return lower.size(); }
  [[nodiscard]] bool contains(const Vector& x) const;
  [[nodiscard]] Vector center() const { return 0.5 * (lower + upper); }
};

// Row-major tensor grid over a box (last coordinate varies fastest).
// A resolution of 1 along an axis places the single node at the box center.
std::vector<Vector> grid_points(const Box& box, const std::vector<int>& resolution);

// Deterministic RNG plumbing. mt19937_64 is fully specified by the standard;
// the real-valued conversions below avoid implementation-defined
// distributions so that seeded streams are identical across platforms.
using Rng = std::mt19937_64;

double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
Vector uniform_in_box(Rng& rng, const Box& box);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
// Named sub-stream of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

std::string to_hex64(std::uint64_t value);
// "%a" hex-float, exact round trip through parse_hexfloat.
std::string hexfloat(double value);
double parse_hexfloat(const std::string& text);

bool all_finite(const Vector& v);

}  // namespace koopcheck
