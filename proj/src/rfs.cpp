#include "nrdr/rfs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nrdr/errors.hpp"
#include "nrdr/rng.hpp"

namespace nrdr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}  // namespace

void AxisDensity::validate() const {
  if (!std::isfinite(mu) || !(scale > 0.0))
    throw ConfigError("axis density: mu must be finite and scale positive");
}

void BernoulliComponent::validate() const {
  if (!(r >= 0.0 && r <= 1.0))
    throw ConfigError("bernoulli component: r must be in [0, 1]");
  x.validate();
  y.validate();
  z.validate();
  if (!anchor.allFinite())
    throw ConfigError("bernoulli component: anchor must be finite");
}

void MultiBernoulli::validate() const {
  if (components.empty()) throw ConfigError("multi-bernoulli: no components");
  for (const auto& c : components) c.validate();
}

void PointCloud::validate() const {
  for (const auto& p : points)
    if (!p.allFinite()) throw DataError("point cloud: non-finite coordinate");
  for (const auto& [name, column] : attributes) {
    if (column.size() != points.size())
      throw DataError("point cloud: attribute '" + name +
                      "' has wrong length");
    for (double v : column)
      if (!std::isfinite(v))
        throw DataError("point cloud: attribute '" + name + "' non-finite");
  }
}

double axis_log_density(const AxisDensity& d, double v) {
  d.validate();
  if (d.family == DensityFamily::Laplace)
    return -std::log(2.0 * d.scale) - std::abs(v - d.mu) / d.scale;
  const double z = (v - d.mu) / d.scale;
  return -std::log(d.scale) - kLogSqrt2Pi - 0.5 * z * z;
}

double axis_sample(const AxisDensity& d, Rng& rng) {
  if (d.family == DensityFamily::Laplace) return rng.laplace(d.mu, d.scale);
  return d.mu + d.scale * rng.normal();
}

double log_sum_exp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double BernoulliComponent::log_density_at(const Vec3& p) const {
  return axis_log_density(x, p.x()) + axis_log_density(y, p.y()) +
         axis_log_density(z, p.z());
}

double bernoulli_set_log_density(const BernoulliComponent& c,
                                 std::span<const Vec3> set) {
  c.validate();
  if (set.size() >= 2) return kNegInf;
  if (set.empty()) return std::log1p(-c.r);
  return std::log(c.r) + c.log_density_at(set[0]);
}

double mb_exact_set_log_density(const MultiBernoulli& mb, const PointCloud& cloud) {
  mb.validate();
  cloud.validate();
  const std::size_t n = mb.components.size();
  const std::size_t m = cloud.size();
  if (m > n) return kNegInf;
  if (m > 24)
    throw DataError("exact MB density: cloud too large for exact enumeration");

  // f[mask] = log-probability that components i..n-1 produce exactly the
  // points in mask. Swept from i = n down to 0.
  const std::size_t num_masks = std::size_t{1} << m;
  std::vector<double> cur(num_masks, kNegInf), next(num_masks, kNegInf);
  cur[0] = 0.0;

  std::vector<double> terms;
  terms.reserve(m + 1);
  for (std::size_t ii = n; ii-- > 0;) {
    const BernoulliComponent& c = mb.components[ii];
    const double log_miss = std::log1p(-c.r);
    const double log_hit = std::log(c.r);
    std::swap(cur, next);
    for (std::size_t mask = 0; mask < num_masks; ++mask) {
      terms.clear();
      terms.push_back(log_miss + next[mask]);
      for (std::size_t j = 0; j < m; ++j) {
        if (!(mask & (std::size_t{1} << j))) continue;
        terms.push_back(log_hit + c.log_density_at(cloud.points[j]) +
                        next[mask ^ (std::size_t{1} << j)]);
      }
      cur[mask] = log_sum_exp(terms);
    }
  }
  return cur[num_masks - 1];
}

PointCloud mb_sample(const MultiBernoulli& mb, std::uint64_t seed) {
  mb.validate();
  PointCloud cloud;
  for (std::size_t i = 0; i < mb.components.size(); ++i) {
    const BernoulliComponent& c = mb.components[i];
    Rng rng(mix_seed(seed, i));
    if (rng.uniform() >= c.r) continue;
    cloud.points.emplace_back(axis_sample(c.x, rng), axis_sample(c.y, rng),
                              axis_sample(c.z, rng));
  }
  return cloud;
}

}  // namespace nrdr
