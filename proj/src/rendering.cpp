#include "nrdr/rendering.hpp"

#include <bit>
#include <cmath>

#include "nrdr/errors.hpp"
#include "nrdr/rng.hpp"

namespace nrdr {

void RaySamples::validate() const {
  if (distances.empty()) throw DataError("ray samples: empty");
  if (distances.size() != positions.size())
    throw DataError("ray samples: distances/positions size mismatch");
  if (!(max_range > 0.0)) throw DataError("ray samples: max_range must be positive");
  double prev = 0.0;
  for (double d : distances) {
    if (!(d > prev) || d > max_range)
      throw DataError("ray samples: distances must be strictly ascending in (0, max_range]");
    prev = d;
  }
}

void OpacityParams::validate() const {
  if (!(beta > 0.0)) throw ConfigError("opacity params: beta must be positive");
}

RaySamples sample_ray(const Ray& ray, const RadarConfig& cfg, std::uint64_t seed) {
  if (cfg.num_samples_per_ray < 2)
    throw ConfigError("sample_ray: num_samples_per_ray must be at least 2");

  std::uint64_t h = mix_seed(seed, std::bit_cast<std::uint64_t>(ray.azimuth));
  h = mix_seed(h, std::bit_cast<std::uint64_t>(ray.elevation));
  Rng rng(h);

  const int n = cfg.num_samples_per_ray;
  const double stratum = cfg.max_range / n;
  RaySamples out;
  out.max_range = cfg.max_range;
  out.distances.resize(n);
  out.positions.resize(n);
  for (int i = 0; i < n; ++i) {
    const double tau = (i + rng.uniform_open()) * stratum;
    out.distances[i] = tau;
    out.positions[i] = ray.origin + tau * ray.direction;
  }
  return out;
}

double opacity(double signed_distance, const OpacityParams& params) {
  return 1.0 / (1.0 + std::exp(params.beta * signed_distance));
}

std::vector<double> weights_from_opacities(const std::vector<double>& alphas) {
  std::vector<double> w(alphas.size());
  double transmittance = 1.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    w[i] = alphas[i] * transmittance;
    transmittance *= 1.0 - alphas[i];
  }
  return w;
}

RayRender render_ray(const Scene& scene, const Ray& ray, const RaySamples& samples,
                     const OpacityParams& params, double time) {
  samples.validate();
  params.validate();

  const int n = samples.count();
  std::vector<double> alphas(n);
  MatX features(scene.feature_dim(), n);
  for (int i = 0; i < n; ++i) {
    const SceneQuery q = scene.query(samples.positions[i], time, ray.direction);
    alphas[i] = opacity(q.signed_distance, params);
    features.col(i) = q.feature;
  }

  RayRender out;
  out.weights = weights_from_opacities(alphas);
  out.feature = VecX::Zero(scene.feature_dim());
  double weight_sum = 0.0;
  double depth_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    out.feature += out.weights[i] * features.col(i);
    weight_sum += out.weights[i];
    depth_sum += out.weights[i] * samples.distances[i];
  }
  out.opacity_sum = weight_sum;

  if (params.unnormalized_depth) {
    out.expected_depth = depth_sum;
  } else if (weight_sum > 1e-8) {
    out.expected_depth = depth_sum / weight_sum;
  } else {
    out.expected_depth = samples.max_range;  // nothing in range
  }
  out.return_position =
      spherical_to_cartesian(out.expected_depth, ray.azimuth, ray.elevation);
  return out;
}

std::vector<RayRender> render_bundle(const Scene& scene, const RayBundle& bundle,
                                     const RadarConfig& cfg,
                                     const OpacityParams& params,
                                     std::uint64_t seed) {
  if (bundle.rays.empty()) throw DataError("render_bundle: empty bundle");
  std::vector<RayRender> out;
  out.reserve(bundle.rays.size());
  for (std::size_t i = 0; i < bundle.rays.size(); ++i) {
    const Ray& ray = bundle.rays[i];
    RayRender r = render_ray(scene, ray, sample_ray(ray, cfg, seed), params,
                             bundle.pose.time);
    r.source_index = static_cast<int>(i);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nrdr
