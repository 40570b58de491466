#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <string>

namespace style3d {

// Dense row-major matrix used for token x channel features throughout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vec3 = Eigen::Vector3d;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

}  // namespace style3d
