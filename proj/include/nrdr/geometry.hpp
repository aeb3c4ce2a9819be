#pragma once

#include <cstdint>
#include <vector>

#include "nrdr/types.hpp"

namespace nrdr {

// Pose of the sensor in the world frame. orientation maps sensor-frame
// vectors to world-frame vectors.
struct SensorPose {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  double time = 0.0;

  void validate() const;  // throws ConfigError if not a proper rotation
};

// Sensor description: field of view, beam grid, sampling and decoding knobs.
// Angles are radians. Defaults correspond to a forward-looking automotive
// unit with a wide azimuth fan and a narrow elevation fan.
struct RadarConfig {
  double azimuth_min = -45.84 * kDegree;
  double azimuth_max = 45.84 * kDegree;
  double elevation_min = -4.58 * kDegree;
  double elevation_max = 22.92 * kDegree;
  double ray_divergence_az = 0.015;
  double ray_divergence_el = 0.015;
  double max_range = 250.0;
  int num_samples_per_ray = 32;
  DensityFamily density_family = DensityFamily::Laplace;
  double max_offset = 1.5;
  double confidence_threshold = 0.5;

  static constexpr double kDegree = 0.017453292519943295;

  void validate() const;
  int azimuth_count() const;    // rays along azimuth, round(extent / divergence)
  int elevation_count() const;  // rays along elevation
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();  // unit, world frame
  double azimuth = 0.0;            // sensor frame angles the ray was built from
  double elevation = 0.0;
};

// Rays stored azimuth-major: index = i_az * elevation_count + i_el.
struct RayBundle {
  SensorPose pose;
  int azimuth_count = 0;
  int elevation_count = 0;
  std::vector<Ray> rays;
};

// x forward, y left, z up:
//   x = r cos(el) cos(az), y = r cos(el) sin(az), z = r sin(el)
Vec3 spherical_to_cartesian(double range, double azimuth, double elevation);

struct Spherical {
  double range = 0.0;
  double azimuth = 0.0;
  double elevation = 0.0;
};

// Inverse of spherical_to_cartesian; the zero vector maps to all-zero angles.
Spherical cartesian_to_spherical(const Vec3& p);

// Build the ray grid for one scan. Rays point at beam cell centers; the grid
// covers the configured field of view with cells of size ray_divergence.
RayBundle build_ray_grid(const SensorPose& pose, const RadarConfig& config);

}  // namespace nrdr
