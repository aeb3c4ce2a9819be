#pragma once

#include <Eigen/Dense>
#include <string>

#include "nrdr/errors.hpp"

namespace nrdr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

enum class DensityFamily { Laplace, Gaussian };

inline const char* to_string(DensityFamily f) {
  return f == DensityFamily::Laplace ? "laplace" : "gaussian";
}

inline DensityFamily density_family_from_string(const std::string& s) {
  if (s == "laplace") return DensityFamily::Laplace;
  if (s == "gaussian") return DensityFamily::Gaussian;
  throw ConfigError("unknown density family '" + s + "' (expected laplace or gaussian)");
}

}  // namespace nrdr
