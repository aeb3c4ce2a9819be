#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "nrdr/errors.hpp"
#include "nrdr/rfs.hpp"
#include "nrdr/rng.hpp"

using namespace nrdr;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

AxisDensity axis(DensityFamily family, double mu, double scale) {
  AxisDensity d;
  d.family = family;
  d.mu = mu;
  d.scale = scale;
  return d;
}

BernoulliComponent component(double r, DensityFamily family, const Vec3& mu,
                             double scale) {
  BernoulliComponent c;
  c.r = r;
  c.x = axis(family, mu.x(), scale);
  c.y = axis(family, mu.y(), scale);
  c.z = axis(family, mu.z(), scale);
  return c;
}

// Reference Multi-Bernoulli set density: directly sum the probability of
// every injective map from cloud points to components. Independent of the
// subset-DP implementation under test.
double mb_enumerated_log_density(const MultiBernoulli& mb,
                                 const PointCloud& cloud) {
  const std::size_t n = mb.components.size();
  const std::size_t m = cloud.size();
  if (m > n) return kNegInf;

  std::vector<char> used(n, 0);
  std::vector<double> terms;
  auto recurse = [&](auto&& self, std::size_t j, double acc) -> void {
    if (j == m) {
      double total = acc;
      for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) total += std::log1p(-mb.components[i].r);
      terms.push_back(total);
      return;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      used[i] = 1;
      self(self, j + 1,
           acc + std::log(mb.components[i].r) +
               mb.components[i].log_density_at(cloud.points[j]));
      used[i] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return log_sum_exp(terms);
}

}  // namespace

TEST_SUITE("rfs") {

TEST_CASE("axis log densities match closed forms") {
  CHECK(axis_log_density(axis(DensityFamily::Laplace, 0.0, 1.0), 2.0) ==
        doctest::Approx(-2.6931471805599454).epsilon(1e-15));
  CHECK(axis_log_density(axis(DensityFamily::Laplace, 1.0, 0.5), 2.0) ==
        doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(axis_log_density(axis(DensityFamily::Gaussian, 0.0, 1.0), 0.0) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-15));
  CHECK(axis_log_density(axis(DensityFamily::Gaussian, 1.0, 2.0), 3.0) ==
        doctest::Approx(-0.5 * std::log(2.0 * 3.141592653589793) -
                        std::log(2.0) - 0.5)
            .epsilon(1e-12));
  // Laplace has heavier tails than a Gaussian of equal scale.
  CHECK(axis_log_density(axis(DensityFamily::Laplace, 0.0, 1.0), 6.0) >
        axis_log_density(axis(DensityFamily::Gaussian, 0.0, 1.0), 6.0));

  CHECK_THROWS_AS(axis_log_density(axis(DensityFamily::Laplace, 0.0, 0.0), 1.0),
                  ConfigError);
}

TEST_CASE("log_sum_exp is safe at the extremes") {
  const double vals_a[] = {0.0, 0.0};
  CHECK(log_sum_exp(vals_a) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double vals_b[] = {-1000.0, -1000.0};
  CHECK(log_sum_exp(vals_b) ==
        doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
  const double vals_c[] = {800.0, 800.0};
  CHECK(log_sum_exp(vals_c) ==
        doctest::Approx(800.0 + std::log(2.0)).epsilon(1e-15));
  const double vals_d[] = {kNegInf, 3.0};
  CHECK(log_sum_exp(vals_d) == doctest::Approx(3.0).epsilon(1e-15));
  const double vals_e[] = {kNegInf, kNegInf};
  CHECK(log_sum_exp(vals_e) == kNegInf);
  CHECK(log_sum_exp({}) == kNegInf);
}

TEST_CASE("bernoulli set density covers empty, singleton, and impossible") {
  const BernoulliComponent c =
      component(0.75, DensityFamily::Laplace, Vec3(1, 2, 3), 0.5);

  const Vec3 none[] = {Vec3::Zero()};
  CHECK(bernoulli_set_log_density(c, {none, 0}) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-15));

  const Vec3 at_mu[] = {Vec3(1, 2, 3)};
  CHECK(bernoulli_set_log_density(c, {at_mu, 1}) ==
        doctest::Approx(std::log(0.75) + 3.0 * -std::log(1.0)).epsilon(1e-12));

  const Vec3 pair[] = {Vec3(1, 2, 3), Vec3(0, 0, 0)};
  CHECK(bernoulli_set_log_density(c, {pair, 2}) == kNegInf);
}

TEST_CASE("exact MB set density equals direct enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 4);  // 1..4 components
    const int m = static_cast<int>(rng.uniform() * (n + 1));  // 0..n points
    const DensityFamily family =
        trial % 2 == 0 ? DensityFamily::Laplace : DensityFamily::Gaussian;

    MultiBernoulli mb;
    for (int i = 0; i < n; ++i)
      mb.components.push_back(component(
          rng.uniform(0.05, 0.95), family,
          Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)),
          rng.uniform(0.2, 1.0)));

    PointCloud cloud;
    for (int j = 0; j < m; ++j)
      cloud.points.emplace_back(rng.uniform(-2, 2), rng.uniform(-2, 2),
                                rng.uniform(-2, 2));

    const double exact = mb_exact_set_log_density(mb, cloud);
    const double brute = mb_enumerated_log_density(mb, cloud);
    CHECK(exact == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("exact MB density hand cases") {
  MultiBernoulli one;
  one.components.push_back(
      component(0.6, DensityFamily::Gaussian, Vec3::Zero(), 1.0));
  PointCloud empty;
  CHECK(mb_exact_set_log_density(one, empty) ==
        doctest::Approx(std::log(0.4)).epsilon(1e-15));

  PointCloud single;
  single.points.emplace_back(0, 0, 0);
  CHECK(mb_exact_set_log_density(one, single) ==
        doctest::Approx(std::log(0.6) + 3.0 * -0.9189385332046727)
            .epsilon(1e-12));

  // More points than components is impossible.
  PointCloud two;
  two.points.emplace_back(0, 0, 0);
  two.points.emplace_back(1, 1, 1);
  CHECK(mb_exact_set_log_density(one, two) == kNegInf);
}

TEST_CASE("mb_sample is deterministic in the seed and honors existence") {
  MultiBernoulli sure;
  for (int i = 0; i < 3; ++i)
    sure.components.push_back(component(
        1.0, DensityFamily::Laplace, Vec3(i, -i, 2.0 * i), 0.3));

  const PointCloud a = mb_sample(sure, 42);
  const PointCloud b = mb_sample(sure, 42);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK((a.points[i] - b.points[i]).norm() == 0.0);
  const PointCloud c = mb_sample(sure, 43);
  CHECK((a.points[0] - c.points[0]).norm() > 0.0);

  MultiBernoulli never;
  never.components.push_back(
      component(0.0, DensityFamily::Laplace, Vec3::Zero(), 1.0));
  CHECK(mb_sample(never, 0).empty());
}

TEST_CASE("empty-set frequency approximates 1 - r") {
  MultiBernoulli mb;
  mb.components.push_back(
      component(0.75, DensityFamily::Laplace, Vec3::Zero(), 1.0));
  int empties = 0;
  const int trials = 2000;
  for (int s = 0; s < trials; ++s)
    if (mb_sample(mb, 1000 + s).empty()) ++empties;
  const double frequency = static_cast<double>(empties) / trials;
  CHECK(frequency > 0.2);
  CHECK(frequency < 0.3);
}

TEST_CASE("validation catches bad components and clouds") {
  BernoulliComponent c = component(1.5, DensityFamily::Laplace, Vec3::Zero(), 1.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = component(0.5, DensityFamily::Laplace, Vec3::Zero(), -1.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);

  MultiBernoulli mb;
  CHECK_THROWS_AS(mb.validate(), ConfigError);

  PointCloud cloud;
  cloud.points.emplace_back(0, 0, 0);
  cloud.attributes["amplitude"] = {1.0, 2.0};  // misaligned column
  CHECK_THROWS_AS(cloud.validate(), DataError);
  cloud.attributes["amplitude"] = {std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(cloud.validate(), DataError);
}

}  // TEST_SUITE("rfs")
