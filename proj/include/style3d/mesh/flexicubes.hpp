#pragma once

#include "style3d/mesh/mesh.hpp"
#include "style3d/mesh/sdf_grid.hpp"

#include <functional>

namespace style3d::mesh {

using ColorFn = std::function<Vec3(const Vec3&)>;

// Dual surface extraction. Each sign-changing cell contributes one vertex per
// connected patch of its marching-cubes configuration, placed at the
// beta-weighted mean of its alpha-weighted edge crossings; every interior
// sign-changing edge yields a quad over its four cells, split into two
// triangles along the diagonal favoured by gamma. Colors come from `color`
// when given, else mid gray.
MeshResult extract_mesh(const SdfGrid& grid, const ColorFn& color = nullptr);

// Triangles with area at or below this are dropped.
inline constexpr double kDegenerateArea = 1e-12;

struct RegularizerGradient {
  double value = 0.0;
  std::vector<Vec3> d_deformations;
  std::vector<CellWeights> d_weights;
};

// mean_v |delta_v / cell|^2 + mean over all cell weights of (w - 1)^2.
double flexi_regularizer(const SdfGrid& grid);
RegularizerGradient flexi_regularizer_gradient(const SdfGrid& grid);

}  // namespace style3d::mesh
