#pragma once

#include <cstdint>
#include <vector>

#include "nrdr/geometry.hpp"
#include "nrdr/scene.hpp"
#include "nrdr/types.hpp"

namespace nrdr {

// Sample distances along one ray and the corresponding world-frame points.
struct RaySamples {
  std::vector<double> distances;  // strictly ascending, in (0, max_range]
  std::vector<Vec3> positions;
  double max_range = 0.0;

  int count() const { return static_cast<int>(distances.size()); }
  void validate() const;
};

struct OpacityParams {
  double beta = 20.0;  // steepness of the signed-distance-to-opacity logistic
  // When set, expected depth is the plain weighted sum of sample distances
  // (no normalization by the weight total, no empty-ray fallback).
  bool unnormalized_depth = false;

  void validate() const;
};

// Per-ray rendering result.
struct RayRender {
  VecX feature;                 // weight-blended scene features
  std::vector<double> weights;  // one per sample, in [0,1], sum <= 1
  double expected_depth = 0.0;
  Vec3 return_position = Vec3::Zero();  // sensor frame
  double opacity_sum = 0.0;             // sum of weights
  // Position of the ray within the bundle it was rendered from. Decoders
  // with per-ray parameter tables key on this, so it follows the ray when a
  // render list is reordered.
  int source_index = 0;
};

// Stratified sampling: one draw per equal sub-interval of (0, max_range].
// The RNG substream is keyed on (seed, azimuth, elevation), so equal rays get
// equal samples no matter where they sit in a bundle.
RaySamples sample_ray(const Ray& ray, const RadarConfig& cfg, std::uint64_t seed);

// alpha = 1 / (1 + exp(beta * s)): 0.5 at the surface, ~1 inside, ~0 outside.
double opacity(double signed_distance, const OpacityParams& params);

// w_i = alpha_i * prod_{j<i} (1 - alpha_j)
std::vector<double> weights_from_opacities(const std::vector<double>& alphas);

RayRender render_ray(const Scene& scene, const Ray& ray, const RaySamples& samples,
                     const OpacityParams& params, double time = 0.0);

std::vector<RayRender> render_bundle(const Scene& scene, const RayBundle& bundle,
                                     const RadarConfig& cfg,
                                     const OpacityParams& params,
                                     std::uint64_t seed);

}  // namespace nrdr
