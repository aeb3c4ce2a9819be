#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "nrdr/types.hpp"

namespace nrdr {

// Location density along one axis: Laplace(mu, b) or Gaussian(mu, sigma).
struct AxisDensity {
  DensityFamily family = DensityFamily::Laplace;
  double mu = 0.0;
  double scale = 1.0;

  void validate() const;
};

// A detection that exists with probability r and, if it exists, has a
// position drawn per-axis from independent densities. anchor is the ray
// return position the component hangs off; mu is anchor + learned offset.
struct BernoulliComponent {
  double r = 0.0;
  AxisDensity x, y, z;
  Vec3 anchor = Vec3::Zero();

  void validate() const;
  Vec3 mu() const { return {x.mu, y.mu, z.mu}; }
  double log_density_at(const Vec3& p) const;  // sum of the three axis terms
};

struct MultiBernoulli {
  std::vector<BernoulliComponent> components;  // one per ray, grid order

  void validate() const;
};

// A finite set of detections, sensor frame. Attribute columns are optional
// pass-through data aligned with points.
struct PointCloud {
  std::vector<Vec3> points;
  std::map<std::string, std::vector<double>> attributes;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void validate() const;
};

double axis_log_density(const AxisDensity& d, double v);
double axis_sample(const AxisDensity& d, class Rng& rng);

// log of a numerically safe sum of exponentials; empty or all -inf gives -inf.
double log_sum_exp(std::span<const double> values);

// Log-probability that one Bernoulli component produced `set` (0 or 1
// points). Two or more points are impossible: returns -inf.
double bernoulli_set_log_density(const BernoulliComponent& c,
                                 std::span<const Vec3> set);

// Exact Multi-Bernoulli set log-density: log-sum-exp over every injective
// assignment of cloud points to components, unassigned components
// contributing their empty branch. Meant for small instances; the assignment
// sum is evaluated by subset dynamic programming over cloud points.
double mb_exact_set_log_density(const MultiBernoulli& mb, const PointCloud& cloud);

// Draw one point cloud: each component independently flips existence and, on
// success, samples its three axes. Deterministic in the seed.
PointCloud mb_sample(const MultiBernoulli& mb, std::uint64_t seed);

}  // namespace nrdr
