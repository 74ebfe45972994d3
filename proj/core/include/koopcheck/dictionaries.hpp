#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include <json.hpp>

#include "koopcheck/common.hpp"
#include "koopcheck/systems.hpp"

namespace koopcheck {

struct ConstantObservable {};

// x^alpha with alpha a multi-index of length d.
struct MonomialObservable {
  std::vector<int> exponents;
};

// exp(-shape * |x - center|^2).
struct GaussianObservable {
  Vector center;
  double shape = 1.0;
};

// 1 on the estimated basin of attraction of fixed point `basin`, else 0.
struct IndicatorObservable {
  std::size_t basin = 0;
};

using Observable =
    std::variant<ConstantObservable, MonomialObservable, GaussianObservable, IndicatorObservable>;

// Resolved points of a basin grid. Indicator values at arbitrary x come from
// the label of the nearest point (ties go to the lowest index).
class IndicatorSource {
 public:
  IndicatorSource(std::vector<Vector> points, std::vector<std::size_t> labels);

  // Keeps only points labelled with a stable fixed point.
  static IndicatorSource from_basin_grid(const BasinGrid& grid);

  [[nodiscard]] std::size_t lookup(const Vector& x) const;
  // True when a point of a different basin is within `margin` of being as
  // close as the nearest one, i.e. x sits on an estimated basin boundary.
  [[nodiscard]] bool near_boundary(const Vector& x, double margin) const;

  [[nodiscard]] const std::vector<std::size_t>& basins() const { return basins_; }
  [[nodiscard]] const std::vector<Vector>& points() const { return points_; }
  [[nodiscard]] const std::vector<std::size_t>& labels() const { return labels_; }

 private:
  std::vector<Vector> points_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> basins_;  // distinct labels, ascending

  // Uniform bucket grid over the bounding box of the points, used to answer
  // nearest-point queries with the same result as a linear scan.
  struct Buckets {
    Vector lower;
    Vector width;
    std::vector<int> cells;  // per axis
    std::vector<std::size_t> start;
    std::vector<std::size_t> members;
  };
  Buckets buckets_;

  void build_buckets();
  [[nodiscard]] std::vector<int> cell_of(const Vector& x) const;
  // Calls visit(i) for every point in cells at Chebyshev ring r around `centre`;
  // returns the distance from x beyond which no unvisited point can lie
  // (+inf when the grid is exhausted).
  template <class Visit>
  double visit_ring(const Vector& x, const std::vector<int>& centre, int r, Visit&& visit) const;
};

struct ObservableVector {
  Vector values;
  Vector at;
};

constexpr std::size_t kDictionarySizeCap = 5000;

class Dictionary {
 public:
  Dictionary(std::size_t dimension, std::vector<Observable> entries,
             std::shared_ptr<const IndicatorSource> indicators = nullptr);

  [[nodiscard]] std::size_t dimension() const { return dimension_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<Observable>& entries() const { return entries_; }
  [[nodiscard]] const std::shared_ptr<const IndicatorSource>& indicators() const {
    return indicators_;
  }
  [[nodiscard]] bool has_indicators() const { return indicators_ != nullptr; }

  [[nodiscard]] ObservableVector eval(const Vector& x) const;
  void eval_into(const Vector& x, Eigen::Ref<Vector> out) const;
  // N x n matrix with column k = psi(xs[k]).
  [[nodiscard]] Matrix eval_columns(const std::vector<Vector>& xs) const;
  // N x d, row i = grad psi_i(x). Indicator rows are zero.
  [[nodiscard]] Matrix gradient(const Vector& x) const;

  [[nodiscard]] std::size_t index_of_monomial(const std::vector<int>& exponents) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static Dictionary from_json(const nlohmann::json& j);
  // FNV-1a of the canonical descriptor; identifies the dictionary in models.
  [[nodiscard]] std::uint64_t hash() const { return hash_; }

 private:
  std::size_t dimension_;
  std::vector<Observable> entries_;
  std::shared_ptr<const IndicatorSource> indicators_;
  std::uint64_t hash_ = 0;
};

// All monomials of total degree <= max_degree in graded-lexicographic order;
// size C(d + max_degree, d), or one less without the constant.
Dictionary build_monomial_dictionary(std::size_t d, int max_degree, bool include_constant = true);

Dictionary build_rbf_dictionary(const std::vector<Vector>& centers, double shape,
                                bool include_constant = true);
// Centers drawn uniformly from `region` with a seeded stream.
std::vector<Vector> sample_rbf_centers(const Box& region, std::size_t count, std::uint64_t seed);

// base + one indicator per basin of a stable fixed point found on the grid.
Dictionary build_indicator_augmented(const Dictionary& base, const BasinGrid& basins);

ObservableVector eval_dictionary(const Dictionary& dict, const Vector& x);
Matrix eval_dictionary_gradient(const Dictionary& dict, const Vector& x);

}  // namespace koopcheck
