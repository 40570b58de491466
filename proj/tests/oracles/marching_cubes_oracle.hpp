#pragma once

// Textbook marching cubes over a sampled field, plus point-to-triangle
// distances for comparing surfaces.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

#include "oracles/mc_oracle_table.inc"

struct TriangleSoup {
  std::vector<std::array<Eigen::Vector3d, 3>> triangles;
};

// f < 0 inside; grid of n cells per axis over [-1,1]^3.
inline TriangleSoup marching_cubes(const std::function<double(const Eigen::Vector3d&)>& f, int n) {
  static const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static const int edge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  const double h = 2.0 / n;
  auto pos = [&](int x, int y, int z) { return Eigen::Vector3d(-1 + h * x, -1 + h * y, -1 + h * z); };
  TriangleSoup soup;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        Eigen::Vector3d p[8];
        double v[8];
        int cube = 0;
        for (int i = 0; i < 8; ++i) {
          p[i] = pos(x + corner[i][0], y + corner[i][1], z + corner[i][2]);
          v[i] = f(p[i]);
          if (v[i] < 0) cube |= 1 << i;
        }
        Eigen::Vector3d cross[12];
        for (int e = 0; e < 12; ++e) {
          const int a = edge[e][0], b = edge[e][1];
          if ((v[a] < 0) != (v[b] < 0)) cross[e] = p[a] + (v[a] / (v[a] - v[b])) * (p[b] - p[a]);
        }
        for (int t = 0; kOracleTriTable[cube][t] >= 0; t += 3) {
          soup.triangles.push_back({cross[kOracleTriTable[cube][t]], cross[kOracleTriTable[cube][t + 1]],
                                    cross[kOracleTriTable[cube][t + 2]]});
        }
      }
  return soup;
}

// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
inline double point_triangle_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                                      const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return (p - a).norm();
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

inline double distance_to_soup(const Eigen::Vector3d& p, const TriangleSoup& soup) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : soup.triangles) best = std::min(best, point_triangle_distance(p, t[0], t[1], t[2]));
  return best;
}

}  // namespace oracle
