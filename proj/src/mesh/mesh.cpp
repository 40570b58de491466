#include "style3d/mesh/mesh.hpp"

#include <fmt/format.h>

#include <map>
#include <set>
#include <utility>

namespace style3d::mesh {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

MeshStats MeshResult::stats() const { return mesh_stats(*this); }

MeshStats mesh_stats(const MeshResult& mesh) {
  MeshStats s;
  std::map<std::pair<int, int>, int> half_edges;
  std::set<std::pair<int, int>> edges;
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    bool valid = true;
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= nv) {
        s.defects.push_back(fmt::format("face {} references missing vertex {}", f, t[k]));
        valid = false;
      }
    }
    if (!valid) continue;
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    s.area += triangle_area(a, b, c);
    s.volume += a.dot(b.cross(c)) / 6.0;
    for (int k = 0; k < 3; ++k) {
      const int u = t[k], v = t[(k + 1) % 3];
      ++half_edges[{u, v}];
      edges.insert({std::min(u, v), std::max(u, v)});
    }
  }
  for (const auto& [he, count] : half_edges) {
    if (count > 1) s.defects.push_back(fmt::format("half-edge {}->{} used {} times", he.first, he.second, count));
    if (!half_edges.count({he.second, he.first})) {
      s.defects.push_back(fmt::format("half-edge {}->{} has no twin", he.first, he.second));
    }
  }
  s.watertight = s.defects.empty() && !mesh.faces.empty();
  s.euler_characteristic = nv - static_cast<int>(edges.size()) + static_cast<int>(mesh.faces.size());
  return s;
}

}  // namespace style3d::mesh
