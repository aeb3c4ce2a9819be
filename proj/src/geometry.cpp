#include "nrdr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nrdr/errors.hpp"

namespace nrdr {

void SensorPose::validate() const {
  if (!position.allFinite() || !orientation.allFinite() || !std::isfinite(time))
    throw ConfigError("sensor pose contains non-finite values");
  const double ortho_err =
      (orientation * orientation.transpose() - Mat3::Identity())
          .cwiseAbs()
          .maxCoeff();
  if (ortho_err > 1e-9)
    throw ConfigError("sensor orientation is not orthonormal (error " +
                      std::to_string(ortho_err) + ")");
  if (orientation.determinant() < 1.0 - 1e-9)
    throw ConfigError("sensor orientation is not a proper rotation");
}

void RadarConfig::validate() const {
  if (!(azimuth_min < azimuth_max))
    throw ConfigError("radar config: azimuth_min must be < azimuth_max");
  if (!(elevation_min < elevation_max))
    throw ConfigError("radar config: elevation_min must be < elevation_max");
  if (!(ray_divergence_az > 0.0) || !(ray_divergence_el > 0.0))
    throw ConfigError("radar config: ray divergences must be positive");
  if (!(max_range > 0.0))
    throw ConfigError("radar config: max_range must be positive");
  if (num_samples_per_ray < 1)
    throw ConfigError("radar config: num_samples_per_ray must be at least 1");
  if (!(max_offset >= 0.0))
    throw ConfigError("radar config: max_offset must be nonnegative");
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0))
    throw ConfigError("radar config: confidence_threshold must be in (0, 1)");
  if (azimuth_count() < 1 || elevation_count() < 1)
    throw ConfigError("radar config: field of view narrower than one beam");
}

int RadarConfig::azimuth_count() const {
  return static_cast<int>(
      std::lround((azimuth_max - azimuth_min) / ray_divergence_az));
}

int RadarConfig::elevation_count() const {
  return static_cast<int>(
      std::lround((elevation_max - elevation_min) / ray_divergence_el));
}

Vec3 spherical_to_cartesian(double range, double azimuth, double elevation) {
  const double ce = std::cos(elevation);
  return {range * ce * std::cos(azimuth), range * ce * std::sin(azimuth),
          range * std::sin(elevation)};
}

Spherical cartesian_to_spherical(const Vec3& p) {
  Spherical s;
  s.range = p.norm();
  if (s.range == 0.0) return s;
  s.azimuth = std::atan2(p.y(), p.x());
  s.elevation = std::asin(std::clamp(p.z() / s.range, -1.0, 1.0));
  return s;
}

RayBundle build_ray_grid(const SensorPose& pose, const RadarConfig& config) {
  pose.validate();
  config.validate();

  RayBundle bundle;
  bundle.pose = pose;
  bundle.azimuth_count = config.azimuth_count();
  bundle.elevation_count = config.elevation_count();
  bundle.rays.reserve(static_cast<std::size_t>(bundle.azimuth_count) *
                      bundle.elevation_count);

  const double az_pitch =
      (config.azimuth_max - config.azimuth_min) / bundle.azimuth_count;
  const double el_pitch =
      (config.elevation_max - config.elevation_min) / bundle.elevation_count;

  for (int ia = 0; ia < bundle.azimuth_count; ++ia) {
    const double az = config.azimuth_min + (ia + 0.5) * az_pitch;
    for (int ie = 0; ie < bundle.elevation_count; ++ie) {
      const double el = config.elevation_min + (ie + 0.5) * el_pitch;
      Ray ray;
      ray.origin = pose.position;
      ray.direction = pose.orientation * spherical_to_cartesian(1.0, az, el);
      ray.azimuth = az;
      ray.elevation = el;
      bundle.rays.push_back(ray);
    }
  }
  return bundle;
}

}  // namespace nrdr
