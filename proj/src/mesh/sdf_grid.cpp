#include "style3d/mesh/sdf_grid.hpp"

#include "style3d/error.hpp"

#include <algorithm>
#include <cmath>

namespace style3d::mesh {

SdfGrid::SdfGrid(int res, SignConvention conv) : resolution(res), convention(conv) {
  if (res < 2) throw ValidationError("grid resolution must be >= 2, got " + std::to_string(res));
  values.assign(vertex_count(), 0.0);
  deformations.assign(vertex_count(), Vec3::Zero());
  weights.assign(cell_count(), CellWeights{});
}

std::size_t SdfGrid::vertex_count() const {
  const std::size_t n = static_cast<std::size_t>(resolution) + 1;
  return n * n * n;
}

std::size_t SdfGrid::cell_count() const {
  const std::size_t n = static_cast<std::size_t>(resolution);
  return n * n * n;
}

std::size_t SdfGrid::vertex_index(int x, int y, int z) const {
  const std::size_t n = static_cast<std::size_t>(resolution) + 1;
  return (static_cast<std::size_t>(z) * n + y) * n + x;
}

std::size_t SdfGrid::cell_index(int x, int y, int z) const {
  const std::size_t n = static_cast<std::size_t>(resolution);
  return (static_cast<std::size_t>(z) * n + y) * n + x;
}

Vec3 SdfGrid::rest_position(int x, int y, int z) const {
  const double h = cell_size();
  return Vec3(kBoxMin + h * x, kBoxMin + h * y, kBoxMin + h * z);
}

Vec3 SdfGrid::position(int x, int y, int z) const { return rest_position(x, y, z) + deformations[vertex_index(x, y, z)]; }

bool SdfGrid::inside(std::size_t v) const {
  return convention == SignConvention::positive_inside ? values[v] > 0.0 : values[v] < 0.0;
}

void SdfGrid::clamp_deformations() {
  const double lim = 0.5 * cell_size();
  for (Vec3& d : deformations) d = d.cwiseMax(-lim).cwiseMin(lim);
}

bool SdfGrid::is_neutral(double tol) const {
  for (const Vec3& d : deformations)
    if (d.cwiseAbs().maxCoeff() > tol) return false;
  for (const CellWeights& w : weights)
    for (int i = 0; i < CellWeights::kCount; ++i)
      if (std::abs(w[i] - 1.0) > tol) return false;
  return true;
}

void SdfGrid::validate() const {
  if (resolution < 2) throw ValidationError("grid resolution must be >= 2, got " + std::to_string(resolution));
  if (values.size() != vertex_count() || deformations.size() != vertex_count() || weights.size() != cell_count()) {
    throw ValidationError("grid arrays do not match resolution " + std::to_string(resolution));
  }
  const double lim = 0.5 * cell_size() * (1.0 + 1e-9);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw ValidationError("non-finite SDF value at vertex " + std::to_string(i));
    if (!deformations[i].allFinite()) throw ValidationError("non-finite deformation at vertex " + std::to_string(i));
    if (deformations[i].cwiseAbs().maxCoeff() > lim) {
      throw ValidationError("deformation exceeds half a cell at vertex " + std::to_string(i));
    }
  }
  for (std::size_t c = 0; c < weights.size(); ++c)
    for (int i = 0; i < CellWeights::kCount; ++i)
      if (!(weights[c][i] > 0.0) || !std::isfinite(weights[c][i])) {
        throw ValidationError("cell " + std::to_string(c) + " has a non-positive or non-finite weight");
      }
}

SdfGrid sample_grid(int resolution, const std::function<double(const Vec3&)>& f, SignConvention convention) {
  SdfGrid g(resolution, convention);
  const int n = g.vertices_per_axis();
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) g.values[g.vertex_index(x, y, z)] = f(g.rest_position(x, y, z));
  return g;
}

}  // namespace style3d::mesh
