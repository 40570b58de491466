#include "style3d/mesh/flexicubes.hpp"

#include "style3d/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace style3d::mesh {
namespace {

#include "mc_table.inc"

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

// Connected patches of each case, from the triangle table. Complementary cases
// share one layout so flipping every sign only reverses orientation.
struct CaseGroups {
  std::array<int, 12> group;  // -1 when the edge has no crossing
  int count = 0;
};

std::array<CaseGroups, 256> build_case_groups() {
  std::array<CaseGroups, 256> out{};
  for (int c = 0; c < 256; ++c) {
    const int canon = std::min(c, 255 ^ c);
    std::array<int, 12> parent;
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int e) {
      while (parent[e] != e) e = parent[e] = parent[parent[e]];
      return e;
    };
    std::array<bool, 12> used{};
    for (int t = 0; t < 16 && kTriTable[canon][t] >= 0; t += 3) {
      const int a = kTriTable[canon][t], b = kTriTable[canon][t + 1], d = kTriTable[canon][t + 2];
      used[a] = used[b] = used[d] = true;
      parent[find(b)] = find(a);
      parent[find(d)] = find(a);
    }
    CaseGroups& g = out[c];
    g.group.fill(-1);
    std::array<int, 12> root_id;
    root_id.fill(-1);
    for (int e = 0; e < 12; ++e) {
      if (!used[e]) continue;
      const int r = find(e);
      if (root_id[r] < 0) root_id[r] = g.count++;
      g.group[e] = root_id[r];
    }
  }
  return out;
}

const std::array<CaseGroups, 256>& case_groups() {
  static const std::array<CaseGroups, 256> groups = build_case_groups();
  return groups;
}

// Local edge index for an edge along `axis` starting at corner offset (dx,dy,dz).
int local_edge(int axis, int dx, int dy, int dz) {
  for (int e = 0; e < 12; ++e) {
    const int* a = kCorner[kEdge[e][0]];
    const int* b = kCorner[kEdge[e][1]];
    int ax = -1;
    for (int k = 0; k < 3; ++k)
      if (a[k] != b[k]) ax = k;
    const int lo[3] = {std::min(a[0], b[0]), std::min(a[1], b[1]), std::min(a[2], b[2])};
    if (ax == axis && lo[0] == dx && lo[1] == dy && lo[2] == dz) return e;
  }
  return -1;
}

}  // namespace

MeshResult extract_mesh(const SdfGrid& grid, const ColorFn& color) {
  grid.validate();
  const int R = grid.resolution;
  const auto& groups = case_groups();
  const double sign = grid.convention == SignConvention::positive_inside ? 1.0 : -1.0;

  std::vector<Vec3> dual;
  std::vector<int> cell_first(grid.cell_count(), -1);
  std::vector<std::uint8_t> cell_case(grid.cell_count(), 0);

  for (int z = 0; z < R; ++z)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        std::size_t vid[8];
        int cube = 0;
        for (int i = 0; i < 8; ++i) {
          vid[i] = grid.vertex_index(x + kCorner[i][0], y + kCorner[i][1], z + kCorner[i][2]);
          if (grid.inside(vid[i])) cube |= 1 << i;
        }
        if (cube == 0 || cube == 255) continue;
        const std::size_t cell = grid.cell_index(x, y, z);
        const CellWeights& w = grid.weights[cell];
        const CaseGroups& g = groups[cube];
        cell_case[cell] = static_cast<std::uint8_t>(cube);
        cell_first[cell] = static_cast<int>(dual.size());

        std::vector<Vec3> sum(g.count, Vec3::Zero());
        std::vector<double> wsum(g.count, 0.0);
        for (int e = 0; e < 12; ++e) {
          if (g.group[e] < 0) continue;
          const int i = kEdge[e][0], j = kEdge[e][1];
          const Vec3 pi = grid.position(x + kCorner[i][0], y + kCorner[i][1], z + kCorner[i][2]);
          const Vec3 pj = grid.position(x + kCorner[j][0], y + kCorner[j][1], z + kCorner[j][2]);
          const double si = sign * grid.values[vid[i]] * w.alpha[i];
          const double sj = sign * grid.values[vid[j]] * w.alpha[j];
          const Vec3 crossing = (sj * pi - si * pj) / (sj - si);
          sum[g.group[e]] += w.beta[e] * crossing;
          wsum[g.group[e]] += w.beta[e];
        }
        for (int k = 0; k < g.count; ++k) dual.push_back(sum[k] / wsum[k]);
      }

  MeshResult mesh;
  std::vector<int> remap(dual.size(), -1);
  auto use = [&](int v) {
    if (remap[v] < 0) {
      remap[v] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(dual[v]);
    }
    return remap[v];
  };

  const int n = grid.vertices_per_axis();
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int p[3] = {x, y, z};
        const std::size_t v0 = grid.vertex_index(x, y, z);
        for (int a = 0; a < 3; ++a) {
          if (p[a] + 1 >= n) continue;
          const int b = (a + 1) % 3, c = (a + 2) % 3;
          if (p[b] < 1 || p[b] > R - 1 || p[c] < 1 || p[c] > R - 1) continue;
          int q1[3] = {x, y, z};
          ++q1[a];
          const std::size_t v1 = grid.vertex_index(q1[0], q1[1], q1[2]);
          const bool in0 = grid.inside(v0);
          if (in0 == grid.inside(v1)) continue;

          // Cells around the edge, counter-clockwise seen from +a.
          const int ring[4][2] = {{-1, -1}, {0, -1}, {0, 0}, {-1, 0}};
          int quad[4];
          double gamma[4];
          for (int k = 0; k < 4; ++k) {
            int cc[3] = {x, y, z};
            cc[b] += ring[k][0];
            cc[c] += ring[k][1];
            const std::size_t cell = grid.cell_index(cc[0], cc[1], cc[2]);
            const int e = local_edge(a, p[0] - cc[0], p[1] - cc[1], p[2] - cc[2]);
            quad[k] = cell_first[cell] + groups[cell_case[cell]].group[e];
            gamma[k] = grid.weights[cell].gamma;
          }
          if (!in0) {
            std::swap(quad[1], quad[3]);
            std::swap(gamma[1], gamma[3]);
          }

          const double g02 = gamma[0] * gamma[2], g13 = gamma[1] * gamma[3];
          bool split02;
          if (std::abs(g02 - g13) > 1e-12 * std::max(g02, g13)) {
            split02 = g02 > g13;
          } else {
            split02 = (dual[quad[0]] - dual[quad[2]]).squaredNorm() <= (dual[quad[1]] - dual[quad[3]]).squaredNorm();
          }
          const int s = split02 ? 0 : 1;
          const int tris[2][3] = {{quad[s], quad[s + 1], quad[s + 2]}, {quad[s], quad[s + 2], quad[(s + 3) % 4]}};
          for (const auto& t : tris) {
            if (triangle_area(dual[t[0]], dual[t[1]], dual[t[2]]) <= kDegenerateArea) continue;
            mesh.faces.push_back({use(t[0]), use(t[1]), use(t[2])});
          }
        }
      }

  mesh.colors.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) mesh.colors.push_back(color ? color(v) : Vec3(0.5, 0.5, 0.5));
  return mesh;
}

double flexi_regularizer(const SdfGrid& grid) { return flexi_regularizer_gradient(grid).value; }

RegularizerGradient flexi_regularizer_gradient(const SdfGrid& grid) {
  grid.validate();
  RegularizerGradient out;
  const double h2 = grid.cell_size() * grid.cell_size();
  const double nv = static_cast<double>(grid.vertex_count());
  const double nw = static_cast<double>(grid.cell_count()) * CellWeights::kCount;
  out.d_deformations.resize(grid.deformations.size());
  out.d_weights.resize(grid.weights.size());
  double def = 0.0, wt = 0.0;
  for (std::size_t i = 0; i < grid.deformations.size(); ++i) {
    const Vec3& d = grid.deformations[i];
    def += d.squaredNorm() / h2;
    out.d_deformations[i] = 2.0 * d / (h2 * nv);
  }
  for (std::size_t c = 0; c < grid.weights.size(); ++c)
    for (int k = 0; k < CellWeights::kCount; ++k) {
      const double r = grid.weights[c][k] - 1.0;
      wt += r * r;
      out.d_weights[c][k] = 2.0 * r / nw;
    }
  out.value = def / nv + wt / nw;
  return out;
}

}  // namespace style3d::mesh
