#pragma once

// Scripted forward passes and analytic references for the reconstruction
// tests, written with plain loops.

#include "style3d/tensor.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

// softmax(q wq (t wk)^T / sqrt(d)) (t wv), added to q, projected by wo + bo.
inline style3d::Matrix cross_attention_readout(const style3d::Matrix& q, const style3d::Matrix& t,
                                               const style3d::Matrix& wq, const style3d::Matrix& wk,
                                               const style3d::Matrix& wv, const style3d::Matrix& wo,
                                               const style3d::Matrix& bo) {
  const auto n = q.rows(), m = t.rows(), d = q.cols(), c = wo.cols();
  auto mul = [](const style3d::Matrix& a, const style3d::Matrix& b) {
    style3d::Matrix r(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        double s = 0;
        for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
        r(i, j) = s;
      }
    return r;
  };
  const style3d::Matrix qh = mul(q, wq), k = mul(t, wk), v = mul(t, wv);
  style3d::Matrix out(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> logits(m);
    double mx = -1e300;
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0;
      for (Eigen::Index k2 = 0; k2 < d; ++k2) s += qh(i, k2) * k(j, k2);
      logits[j] = s / std::sqrt(static_cast<double>(d));
      mx = std::max(mx, logits[j]);
    }
    double z = 0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    std::vector<double> row(d);
    for (Eigen::Index k2 = 0; k2 < d; ++k2) {
      double s = q(i, k2);
      for (Eigen::Index j = 0; j < m; ++j) s += logits[j] / z * v(j, k2);
      row[k2] = s;
    }
    for (Eigen::Index cc = 0; cc < c; ++cc) {
      double s = bo(0, cc);
      for (Eigen::Index k2 = 0; k2 < d; ++k2) s += row[k2] * wo(k2, cc);
      out(i, cc) = s;
    }
  }
  return out;
}

// Projected disk of a sphere (radius r, center at the origin) seen from
// distance dist by a square pinhole camera with vertical fov, as a fraction of
// image area.
inline double sphere_silhouette_fraction(double r, double dist, double fov_deg) {
  const double rho = r / std::sqrt(dist * dist - r * r);
  const double half = std::tan(fov_deg * std::numbers::pi / 360.0);
  return std::numbers::pi * rho * rho / (4.0 * half * half);
}

}  // namespace oracle
