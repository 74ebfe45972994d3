#include "koopcheck/dictionaries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

namespace koopcheck {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double int_pow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

nlohmann::json vector_json(const Vector& v) {
  auto j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vector json_vector(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

// Monomial exponent tuples of total degree `degree` in decreasing lex order.
void exponents_of_degree(std::size_t d, int degree, std::vector<int>& current, std::size_t pos,
                         std::vector<std::vector<int>>& out) {
  if (pos + 1 == d) {
    current[pos] = degree;
    out.push_back(current);
    return;
  }
  for (int k = degree; k >= 0; --k) {
    current[pos] = k;
    exponents_of_degree(d, degree - k, current, pos + 1, out);
  }
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  long double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / i;
  return static_cast<std::size_t>(std::llround(r));
}

}  // namespace

// ---------------------------------------------------------------------------
// IndicatorSource

IndicatorSource::IndicatorSource(std::vector<Vector> points, std::vector<std::size_t> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.size() != labels_.size())
    throw ConfigError("indicator source needs one label per point");
  if (points_.empty()) throw ConfigError("indicator source has no resolved points");
  const std::set<std::size_t> distinct(labels_.begin(), labels_.end());
  basins_.assign(distinct.begin(), distinct.end());
  build_buckets();
}

void IndicatorSource::build_buckets() {
  const auto d = points_.front().size();
  for (const auto& p : points_)
    if (p.size() != d) throw ConfigError("indicator source points differ in dimension");
  Vector lo = points_.front();
  Vector hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // about one point per cell
  const double per_axis = std::pow(static_cast<double>(points_.size()), 1.0 / static_cast<double>(d));
  auto& b = buckets_;
  b.lower = lo;
  b.width = Vector::Ones(d);
  b.cells.assign(static_cast<std::size_t>(d), 1);
  std::size_t total = 1;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double extent = hi[j] - lo[j];
    if (extent > 0.0) {
      b.cells[static_cast<std::size_t>(j)] = std::max(1, static_cast<int>(std::floor(per_axis)));
      b.width[j] = extent / b.cells[static_cast<std::size_t>(j)];
    }
    total *= static_cast<std::size_t>(b.cells[static_cast<std::size_t>(j)]);
  }
  auto flat = [&](const std::vector<int>& c) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < c.size(); ++j) k = k * static_cast<std::size_t>(b.cells[j]) + static_cast<std::size_t>(c[j]);
    return k;
  };
  std::vector<std::size_t> cell(points_.size());
  std::vector<std::size_t> counts(total + 1, 0);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    cell[i] = flat(cell_of(points_[i]));
    ++counts[cell[i] + 1];
  }
  for (std::size_t k = 0; k < total; ++k) counts[k + 1] += counts[k];
  b.start = counts;
  b.members.assign(points_.size(), 0);
  // ascending point index inside each cell
  for (std::size_t i = 0; i < points_.size(); ++i) b.members[counts[cell[i]]++] = i;
}

std::vector<int> IndicatorSource::cell_of(const Vector& x) const {
  const auto& b = buckets_;
  std::vector<int> c(b.cells.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double t = std::floor((x[jj] - b.lower[jj]) / b.width[jj]);
    const double clamped = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, static_cast<double>(b.cells[j] - 1));
    c[j] = static_cast<int>(clamped);
  }
  return c;
}

template <class Visit>
double IndicatorSource::visit_ring(const Vector& x, const std::vector<int>& centre, int r, Visit&& visit) const {
  const auto& b = buckets_;
  const std::size_t d = b.cells.size();
  std::vector<int> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = std::max(0, centre[j] - r);
    hi[j] = std::min(b.cells[j] - 1, centre[j] + r);
  }
  std::vector<int> c = lo;
  for (;;) {
    int cheb = 0;
    for (std::size_t j = 0; j < d; ++j) cheb = std::max(cheb, std::abs(c[j] - centre[j]));
    if (cheb == r) {
      std::size_t k = 0;
      for (std::size_t j = 0; j < d; ++j) k = k * static_cast<std::size_t>(b.cells[j]) + static_cast<std::size_t>(c[j]);
      for (std::size_t m = b.start[k]; m < b.start[k + 1]; ++m) visit(b.members[m]);
    }
    bool advanced = false;
    for (std::size_t j = d; j-- > 0;) {
      if (c[j] < hi[j]) {
        ++c[j];
        advanced = true;
        break;
      }
      c[j] = lo[j];
    }
    if (!advanced) break;
  }
  // Unvisited cells lie outside the slab [centre - r, centre + r] on some axis.
  double bound = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < d; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (centre[j] - r > 0)
      bound = std::min(bound, x[jj] - (b.lower[jj] + (centre[j] - r) * b.width[jj]));
    if (centre[j] + r < b.cells[j] - 1)
      bound = std::min(bound, (b.lower[jj] + (centre[j] + r + 1) * b.width[jj]) - x[jj]);
  }
  return std::max(bound, 0.0);
}

IndicatorSource IndicatorSource::from_basin_grid(const BasinGrid& grid) {
  std::vector<Vector> points;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    const auto& label = grid.labels[i];
    if (!label.resolved()) continue;
    const auto fp = *label.fixed_point;
    if (fp >= grid.fixed_points.size() || grid.fixed_points[fp].stability != Stability::stable)
      continue;
    points.push_back(grid.points[i]);
    labels.push_back(fp);
  }
  if (points.empty()) throw ConfigError("basin grid has no resolved points");
  IndicatorSource source(std::move(points), std::move(labels));
  if (source.basins().size() < 2)
    throw ConfigError("indicator augmentation needs at least two resolved basins");
  return source;
}

std::size_t IndicatorSource::lookup(const Vector& x) const {
  std::size_t best = points_.size();
  double best_dist = std::numeric_limits<double>::infinity();
  const auto centre = cell_of(x);
  for (int r = 0;; ++r) {
    const double bound = visit_ring(x, centre, r, [&](std::size_t i) {
      const double dist = (points_[i] - x).squaredNorm();
      if (dist < best_dist || (dist == best_dist && i < best)) {
        best_dist = dist;
        best = i;
      }
    });
    // ties resolve to the lowest index, so stop only on a strict margin
    if (std::isinf(bound) || (best < points_.size() && best_dist < bound * bound)) break;
  }
  if (best == points_.size()) best = 0;  // x not finite
  return labels_[best];
}

bool IndicatorSource::near_boundary(const Vector& x, double margin) const {
  const std::size_t label = lookup(x);
  double same = std::numeric_limits<double>::infinity();
  double other = std::numeric_limits<double>::infinity();
  const auto centre = cell_of(x);
  for (int r = 0;; ++r) {
    const double bound = visit_ring(x, centre, r, [&](std::size_t i) {
      const double dist = (points_[i] - x).norm();
      double& slot = labels_[i] == label ? same : other;
      slot = std::min(slot, dist);
    });
    if (std::isinf(bound)) break;
    if (other <= bound && same <= bound) break;
    // every unseen point is at least `bound` away
    if (same <= bound && bound - same > margin) break;
  }
  return other - same <= margin;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(std::size_t dimension, std::vector<Observable> entries,
                       std::shared_ptr<const IndicatorSource> indicators)
    : dimension_(dimension), entries_(std::move(entries)), indicators_(std::move(indicators)) {
  if (dimension_ == 0) throw ConfigError("dictionary dimension must be positive");
  if (entries_.empty()) throw ConfigError("dictionary has no entries");
  if (entries_.size() > kDictionarySizeCap)
    throw ConfigError("dictionary size " + std::to_string(entries_.size()) + " exceeds cap " +
                      std::to_string(kDictionarySizeCap));
  for (const auto& e : entries_) {
    std::visit(overloaded{
                   [](const ConstantObservable&) {},
                   [&](const MonomialObservable& m) {
                     if (m.exponents.size() != dimension_)
                       throw ConfigError("monomial exponent length does not match dimension");
                     for (int k : m.exponents)
                       if (k < 0) throw ConfigError("monomial exponents must be non-negative");
                   },
                   [&](const GaussianObservable& g) {
                     if (static_cast<std::size_t>(g.center.size()) != dimension_)
                       throw ConfigError("RBF center dimension does not match dictionary");
                     if (!(g.shape > 0.0)) throw ConfigError("RBF shape must be positive");
                   },
                   [&](const IndicatorObservable& ind) {
                     if (!indicators_) throw ConfigError("indicator entry without basin source");
                     const auto& b = indicators_->basins();
                     if (!std::binary_search(b.begin(), b.end(), ind.basin))
                       throw ConfigError("indicator refers to a basin absent from its source");
                   },
               },
               e);
  }
  hash_ = fnv1a64(to_json().dump());
}

void Dictionary::eval_into(const Vector& x, Eigen::Ref<Vector> out) const {
  std::size_t basin = 0;
  if (indicators_) basin = indicators_->lookup(x);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = std::visit(
        overloaded{
            [](const ConstantObservable&) { return 1.0; },
            [&](const MonomialObservable& m) {
              double v = 1.0;
              for (std::size_t j = 0; j < m.exponents.size(); ++j)
                v *= int_pow(x[static_cast<Eigen::Index>(j)], m.exponents[j]);
              return v;
            },
            [&](const GaussianObservable& g) { return std::exp(-g.shape * (x - g.center).squaredNorm()); },
            [&](const IndicatorObservable& ind) { return ind.basin == basin ? 1.0 : 0.0; },
        },
        entries_[i]);
  }
}

ObservableVector Dictionary::eval(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension_)
    throw ConfigError("evaluation point dimension does not match dictionary");
  if (!x.allFinite()) throw ConfigError("dictionary evaluated at a non-finite point");
  ObservableVector ov{Vector(static_cast<Eigen::Index>(size())), x};
  eval_into(x, ov.values);
  return ov;
}

Matrix Dictionary::eval_columns(const std::vector<Vector>& xs) const {
  Matrix out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (static_cast<std::size_t>(xs[k].size()) != dimension_)
      throw ConfigError("evaluation point dimension does not match dictionary");
    eval_into(xs[k], out.col(static_cast<Eigen::Index>(k)));
  }
  return out;
}

Matrix Dictionary::gradient(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dimension_)
    throw ConfigError("gradient point dimension does not match dictionary");
  const auto d = static_cast<Eigen::Index>(dimension_);
  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(size()), d);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::visit(overloaded{
                   [](const ConstantObservable&) {},
                   [](const IndicatorObservable&) {},
                   [&](const MonomialObservable& m) {
                     for (Eigen::Index j = 0; j < d; ++j) {
                       const int kj = m.exponents[static_cast<std::size_t>(j)];
                       if (kj == 0) continue;
                       double v = kj;
                       for (Eigen::Index l = 0; l < d; ++l) {
                         const int kl = m.exponents[static_cast<std::size_t>(l)];
                         v *= int_pow(x[l], l == j ? kl - 1 : kl);
                       }
                       grad(row, j) = v;
                     }
                   },
                   [&](const GaussianObservable& g) {
                     const Vector diff = x - g.center;
                     const double value = std::exp(-g.shape * diff.squaredNorm());
                     grad.row(row) = (-2.0 * g.shape * value) * diff.transpose();
                   },
               },
               entries_[i]);
  }
  return grad;
}

std::size_t Dictionary::index_of_monomial(const std::vector<int>& exponents) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (const auto* m = std::get_if<MonomialObservable>(&entries_[i]); m && m->exponents == exponents)
      return i;
    if (std::holds_alternative<ConstantObservable>(entries_[i]) &&
        std::all_of(exponents.begin(), exponents.end(), [](int k) { return k == 0; }))
      return i;
  }
  throw ConfigError("dictionary has no such monomial");
}

nlohmann::json Dictionary::to_json() const {
  nlohmann::json j;
  j["dimension"] = dimension_;
  auto entries = nlohmann::json::array();
  for (const auto& e : entries_) {
    entries.push_back(std::visit(
        overloaded{
            [](const ConstantObservable&) { return nlohmann::json{{"kind", "constant"}}; },
            [](const MonomialObservable& m) {
              return nlohmann::json{{"kind", "monomial"}, {"exponents", m.exponents}};
            },
            [](const GaussianObservable& g) {
              return nlohmann::json{{"kind", "gaussian"}, {"center", vector_json(g.center)}, {"shape", g.shape}};
            },
            [](const IndicatorObservable& ind) {
              return nlohmann::json{{"kind", "indicator"}, {"basin", ind.basin}};
            },
        },
        e));
  }
  j["entries"] = std::move(entries);
  if (indicators_) {
    auto points = nlohmann::json::array();
    for (const auto& p : indicators_->points()) points.push_back(vector_json(p));
    j["indicator_source"] = {{"points", std::move(points)}, {"labels", indicators_->labels()}};
  }
  return j;
}

Dictionary Dictionary::from_json(const nlohmann::json& j) {
  try {
    const auto d = j.at("dimension").get<std::size_t>();
    std::shared_ptr<const IndicatorSource> source;
    if (j.contains("indicator_source")) {
      std::vector<Vector> points;
      for (const auto& p : j.at("indicator_source").at("points")) points.push_back(json_vector(p));
      auto labels = j.at("indicator_source").at("labels").get<std::vector<std::size_t>>();
      source = std::make_shared<const IndicatorSource>(std::move(points), std::move(labels));
    }
    std::vector<Observable> entries;
    for (const auto& e : j.at("entries")) {
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "constant") {
        entries.emplace_back(ConstantObservable{});
      } else if (kind == "monomial") {
        entries.emplace_back(MonomialObservable{e.at("exponents").get<std::vector<int>>()});
      } else if (kind == "gaussian") {
        entries.emplace_back(GaussianObservable{json_vector(e.at("center")), e.at("shape").get<double>()});
      } else if (kind == "indicator") {
        entries.emplace_back(IndicatorObservable{e.at("basin").get<std::size_t>()});
      } else {
        throw ConfigError("unknown dictionary entry kind '" + kind + "'");
      }
    }
    return Dictionary(d, std::move(entries), std::move(source));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed dictionary descriptor: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Builders

Dictionary build_monomial_dictionary(std::size_t d, int max_degree, bool include_constant) {
  if (d == 0) throw ConfigError("monomial dictionary dimension must be positive");
  if (max_degree < 1) throw ConfigError("monomial dictionary needs max_degree >= 1");
  const std::size_t count = binomial(d + static_cast<std::size_t>(max_degree), d);
  if (count > kDictionarySizeCap)
    throw ConfigError("monomial dictionary size " + std::to_string(count) + " exceeds cap " +
                      std::to_string(kDictionarySizeCap));
  std::vector<Observable> entries;
  entries.reserve(count);
  if (include_constant) entries.emplace_back(ConstantObservable{});
  std::vector<int> current(d, 0);
  for (int degree = 1; degree <= max_degree; ++degree) {
    std::vector<std::vector<int>> tuples;
    exponents_of_degree(d, degree, current, 0, tuples);
    for (auto& t : tuples) entries.emplace_back(MonomialObservable{std::move(t)});
  }
  return Dictionary(d, std::move(entries));
}

Dictionary build_rbf_dictionary(const std::vector<Vector>& centers, double shape,
                                bool include_constant) {
  if (centers.empty()) throw ConfigError("RBF dictionary needs at least one center");
  if (!(shape > 0.0)) throw ConfigError("RBF shape must be positive");
  std::vector<Observable> entries;
  if (include_constant) entries.emplace_back(ConstantObservable{});
  for (const auto& c : centers) entries.emplace_back(GaussianObservable{c, shape});
  return Dictionary(static_cast<std::size_t>(centers.front().size()), std::move(entries));
}

std::vector<Vector> sample_rbf_centers(const Box& region, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> centers;
  centers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) centers.push_back(uniform_in_box(rng, region));
  return centers;
}

Dictionary build_indicator_augmented(const Dictionary& base, const BasinGrid& basins) {
  if (base.has_indicators()) throw ConfigError("dictionary already carries indicators");
  auto source = std::make_shared<const IndicatorSource>(IndicatorSource::from_basin_grid(basins));
  if (static_cast<std::size_t>(source->points().front().size()) != base.dimension())
    throw ConfigError("basin grid dimension does not match dictionary");
  std::vector<Observable> entries = base.entries();
  for (std::size_t b : source->basins()) entries.emplace_back(IndicatorObservable{b});
  return Dictionary(base.dimension(), std::move(entries), std::move(source));
}

ObservableVector eval_dictionary(const Dictionary& dict, const Vector& x) { return dict.eval(x); }

Matrix eval_dictionary_gradient(const Dictionary& dict, const Vector& x) { return dict.gradient(x); }

}  // namespace koopcheck
