#pragma once

#include "oracles/attention_oracle.hpp"
#include "style3d/rng.hpp"
#include "style3d/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace test_support {

inline oracle::Grid to_grid(const style3d::Matrix& m) {
  oracle::Grid g(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

// max |a - b| / max(1, |b|) over all entries.
inline double max_rel_error(const style3d::Matrix& a, const oracle::Grid& b) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      worst = std::max(worst, std::abs(a(r, c) - b[r][c]) / std::max(1.0, std::abs(b[r][c])));
  return worst;
}

inline double max_rel_error(const style3d::Matrix& a, const style3d::Matrix& b) {
  return max_rel_error(a, to_grid(b));
}

inline bool bit_equal(const style3d::Matrix& a, const style3d::Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
    return std::memcmp(&x, &y, sizeof(double)) == 0;
  });
}

}  // namespace test_support
