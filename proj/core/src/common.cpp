#include "koopcheck/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

namespace koopcheck {

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw ConfigError("box bounds must be non-empty and of equal dimension");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i]))
      throw ConfigError("box lower bound exceeds upper bound");
  }
}

bool Box::contains(const Vector& x) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  }
  return true;
}

std::vector<Vector> grid_points(const Box& box, const std::vector<int>& resolution) {
  const auto d = box.dimension();
  if (static_cast<Eigen::Index>(resolution.size()) != d)
    throw ConfigError("grid resolution must list one count per dimension");
  std::size_t total = 1;
  for (int r : resolution) {
    if (r < 1) throw ConfigError("grid resolution must be positive");
    total *= static_cast<std::size_t>(r);
  }

  std::vector<Vector> points;
  points.reserve(total);
  std::vector<int> index(resolution.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Vector p(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const int r = resolution[static_cast<std::size_t>(i)];
      p[i] = r == 1 ? 0.5 * (box.lower[i] + box.upper[i])
                    : box.lower[i] + (box.upper[i] - box.lower[i]) *
                                         static_cast<double>(index[static_cast<std::size_t>(i)]) /
                                         static_cast<double>(r - 1);
    }
    points.push_back(std::move(p));
    for (auto i = static_cast<std::ptrdiff_t>(d) - 1; i >= 0; --i) {
      auto& k = index[static_cast<std::size_t>(i)];
      if (++k < resolution[static_cast<std::size_t>(i)]) break;
      k = 0;
    }
  }
  return points;
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

Vector uniform_in_box(Rng& rng, const Box& box) {
  Vector x(box.dimension());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uniform(rng, box.lower[i], box.upper[i]);
  return x;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  return splitmix64(master ^ fnv1a64(stream));
}

std::string to_hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string hexfloat(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", value);
  return buf;
}

double parse_hexfloat(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw ConfigError("malformed number: " + text);
  return v;
}

bool all_finite(const Vector& v) {
  return v.allFinite();
}

}  // namespace koopcheck
