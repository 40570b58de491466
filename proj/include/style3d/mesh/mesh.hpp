#pragma once

#include "style3d/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace style3d::mesh {

struct MeshStats {
  bool watertight = false;
  int euler_characteristic = 0;
  double volume = 0.0;  // signed, positive for outward-facing triangles
  double area = 0.0;
  std::vector<std::string> defects;
};

struct MeshResult {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;  // counter-clockwise seen from outside
  std::vector<Vec3> colors;               // per vertex, RGB in [0, 1]

  bool empty() const { return faces.empty(); }
  // Recomputed from the geometry on every call.
  MeshStats stats() const;
};

// Watertightness by half-edge pairing, Euler characteristic V - E + F,
// divergence-theorem volume and summed triangle area. Defects are reported,
// never thrown.
MeshStats mesh_stats(const MeshResult& mesh);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace style3d::mesh
