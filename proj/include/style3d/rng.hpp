#pragma once

#include "style3d/tensor.hpp"

#include <cstdint>
#include <random>

namespace style3d {

// Portable deterministic generator. std distributions are implementation
// defined, so sampling is done by hand on top of mt19937_64 raw output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; one draw per call.
  double normal();

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev);
  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);

 private:
  std::mt19937_64 engine_;
};

}  // namespace style3d
