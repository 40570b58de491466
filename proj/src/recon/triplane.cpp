#include "style3d/recon/triplane.hpp"

#include "style3d/error.hpp"

#include <algorithm>
#include <cmath>

namespace style3d::recon {

void Triplane::validate() const {
  if (resolution < 2 || channels < 1) throw ValidationError("triplane needs resolution >= 2 and channels >= 1");
  for (const Matrix& p : planes) {
    if (p.rows() != static_cast<Eigen::Index>(resolution) * resolution || p.cols() != channels) {
      throw ValidationError("triplane plane shape " + shape_string(p) + " does not match resolution " +
                            std::to_string(resolution) + " and " + std::to_string(channels) + " channels");
    }
  }
}

Eigen::Vector2d plane_coords(PlaneAxis axis, const Vec3& p) {
  switch (axis) {
    case PlaneAxis::xy: return {p.x(), p.y()};
    case PlaneAxis::xz: return {p.x(), p.z()};
    case PlaneAxis::yz: return {p.y(), p.z()};
  }
  return {};
}

ad::SparseMatrix bilinear_weights(const Matrix& points, PlaneAxis axis, int resolution) {
  if (points.cols() != 3) throw ValidationError("sample points must be N x 3");
  const double slack = 1e-9;
  const double scale = (resolution - 1) / (Triplane::kBoxMax - Triplane::kBoxMin);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(points.rows()) * 4);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Vec3 p = points.row(i).transpose();
    if (!p.allFinite() || (p.array() < Triplane::kBoxMin - slack).any() || (p.array() > Triplane::kBoxMax + slack).any()) {
      throw ValidationError("triplane sample outside the bounding box: (" + std::to_string(p.x()) + ", " +
                            std::to_string(p.y()) + ", " + std::to_string(p.z()) + ")");
    }
    const Eigen::Vector2d c = plane_coords(axis, p);
    const double fu = std::clamp((c.x() - Triplane::kBoxMin) * scale, 0.0, static_cast<double>(resolution - 1));
    const double fv = std::clamp((c.y() - Triplane::kBoxMin) * scale, 0.0, static_cast<double>(resolution - 1));
    const int u0 = std::min(static_cast<int>(fu), resolution - 2);
    const int v0 = std::min(static_cast<int>(fv), resolution - 2);
    const double tu = fu - u0, tv = fv - v0;
    const double w[4] = {(1 - tu) * (1 - tv), tu * (1 - tv), (1 - tu) * tv, tu * tv};
    const int idx[4] = {v0 * resolution + u0, v0 * resolution + u0 + 1, (v0 + 1) * resolution + u0,
                        (v0 + 1) * resolution + u0 + 1};
    for (int k = 0; k < 4; ++k)
      if (w[k] != 0.0) trips.emplace_back(static_cast<int>(i), idx[k], w[k]);
  }
  ad::SparseMatrix s(points.rows(), static_cast<Eigen::Index>(resolution) * resolution);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

Eigen::RowVectorXd sample_triplane(const Triplane& tp, const Vec3& xyz) {
  tp.validate();
  const Matrix pt = xyz.transpose();
  Eigen::RowVectorXd out(3 * tp.channels);
  for (int a = 0; a < 3; ++a) {
    const ad::SparseMatrix w = bilinear_weights(pt, static_cast<PlaneAxis>(a), tp.resolution);
    out.segment(a * tp.channels, tp.channels) = (w * tp.planes[a]).row(0);
  }
  return out;
}

ad::Var sample_triplane(const std::array<ad::Var, 3>& planes, int resolution, const Matrix& points) {
  std::array<ad::Var, 3> parts;
  for (int a = 0; a < 3; ++a) {
    parts[a] = ad::sparse_left(bilinear_weights(points, static_cast<PlaneAxis>(a), resolution), planes[a]);
  }
  return ad::concat_cols(parts);
}

}  // namespace style3d::recon
