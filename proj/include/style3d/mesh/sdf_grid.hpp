#pragma once

#include "style3d/tensor.hpp"

#include <array>
#include <functional>
#include <vector>

namespace style3d::mesh {

enum class SignConvention {
  positive_inside,  // s > 0 inside the surface
  negative_inside,  // classic signed distance: s < 0 inside
};

// Per-cell FlexiCubes weights. beta weights the 12 edge crossings when placing
// a dual vertex, alpha the 8 corners when placing a crossing on an edge, gamma
// steers quad triangulation. All neutral at 1.
struct CellWeights {
  static constexpr int kCount = 21;
  std::array<double, 12> beta;
  std::array<double, 8> alpha;
  double gamma;

  CellWeights() { reset(); }
  void reset() {
    beta.fill(1.0);
    alpha.fill(1.0);
    gamma = 1.0;
  }
  double& operator[](int i) { return i < 12 ? beta[i] : i < 20 ? alpha[i - 12] : gamma; }
  double operator[](int i) const { return i < 12 ? beta[i] : i < 20 ? alpha[i - 12] : gamma; }
};

// Scalar field sampled on the (R+1)^3 vertices of an R^3 cell grid spanning
// [-1, 1]^3. Index order is x fastest, then y, then z.
struct SdfGrid {
  int resolution = 0;
  std::vector<double> values;
  // World-space vertex offsets; each component bounded by half a cell.
  std::vector<Vec3> deformations;
  std::vector<CellWeights> weights;  // one per cell
  SignConvention convention = SignConvention::negative_inside;

  static constexpr double kBoxMin = -1.0;
  static constexpr double kBoxMax = 1.0;

  SdfGrid() = default;
  // Neutral grid: zero values, zero deformation, unit weights.
  SdfGrid(int resolution, SignConvention convention);

  int vertices_per_axis() const { return resolution + 1; }
  double cell_size() const { return (kBoxMax - kBoxMin) / resolution; }
  std::size_t vertex_count() const;
  std::size_t cell_count() const;
  std::size_t vertex_index(int x, int y, int z) const;
  std::size_t cell_index(int x, int y, int z) const;

  // Undeformed grid position of a vertex.
  Vec3 rest_position(int x, int y, int z) const;
  Vec3 position(int x, int y, int z) const;

  bool inside(std::size_t vertex) const;

  // Clamps every deformation component to half a cell.
  void clamp_deformations();
  bool is_neutral(double tol = 1e-12) const;

  // Throws ValidationError on size mismatch, resolution < 2, non-finite data,
  // out-of-bound deformation or non-positive weights.
  void validate() const;
};

// Samples f at the grid vertices.
SdfGrid sample_grid(int resolution, const std::function<double(const Vec3&)>& f,
                    SignConvention convention = SignConvention::negative_inside);

}  // namespace style3d::mesh
