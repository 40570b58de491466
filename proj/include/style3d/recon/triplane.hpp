#pragma once

#include "style3d/autodiff.hpp"
#include "style3d/tensor.hpp"

#include <array>

namespace style3d::recon {

enum class PlaneAxis { xy = 0, xz = 1, yz = 2 };

// Three axis-aligned feature planes over [-1, 1]^3. Each plane is an
// (R*R) x C matrix; row v*R + u holds the node at
// (-1 + 2u/(R-1), -1 + 2v/(R-1)) in the plane's (first, second) axes:
// xy -> (x, y), xz -> (x, z), yz -> (y, z).
struct Triplane {
  int resolution = 0;
  int channels = 0;
  std::array<Matrix, 3> planes;

  static constexpr double kBoxMin = -1.0;
  static constexpr double kBoxMax = 1.0;

  // Throws ValidationError unless the planes agree with resolution/channels.
  void validate() const;
};

// The two box coordinates a plane sees of a point.
Eigen::Vector2d plane_coords(PlaneAxis axis, const Vec3& p);

// Bilinear interpolation weights of `points` (N x 3) against one plane:
// an N x R^2 matrix with at most four entries per row. Points must lie in the
// box (1e-9 slack); anything else throws ValidationError.
ad::SparseMatrix bilinear_weights(const Matrix& points, PlaneAxis axis, int resolution);

// Concatenated [xy | xz | yz] samples, 1 x 3C.
Eigen::RowVectorXd sample_triplane(const Triplane& tp, const Vec3& xyz);

// Batched and differentiable: N x 3C.
ad::Var sample_triplane(const std::array<ad::Var, 3>& planes, int resolution, const Matrix& points);

}  // namespace style3d::recon
