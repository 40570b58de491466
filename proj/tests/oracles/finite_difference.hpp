#pragma once

// Central finite differences, the reference every analytic gradient in the
// suite is checked against.

#include "style3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle {

inline style3d::Matrix central_difference(const std::function<double(const style3d::Matrix&)>& f,
                                          const style3d::Matrix& x, double h = 1e-6) {
  style3d::Matrix g(x.rows(), x.cols());
  style3d::Matrix probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + h;
    const double up = f(probe);
    probe.data()[i] = saved - h;
    const double down = f(probe);
    probe.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Relative agreement used by all gradient checks: |a - n| <= tol * max(|a|, |n|, floor).
inline double gradient_mismatch(const style3d::Matrix& analytic, const style3d::Matrix& numeric,
                                double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], n = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace oracle
