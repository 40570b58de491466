#pragma once

#include "style3d/tensor.hpp"

#include <vector>

namespace style3d::diffusion {

// Deterministic DDIM schedule over a scaled-linear beta schedule. Training
// timestep 0 is the clean sample (alpha_bar = 1); alpha_bar(t) is the product
// of (1 - beta_i) for i < t.
class DdimScheduler {
 public:
  DdimScheduler(int train_timesteps = 1000, double beta_start = 0.00085, double beta_end = 0.012);

  int train_timesteps() const { return train_timesteps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  double alpha_bar(int t) const;

  // steps + 1 training timesteps from 0 (clean) to train_timesteps, evenly spaced.
  std::vector<int> timesteps(int steps) const;

  // Moves x from noise level t_from to t_to along the DDIM direction given by
  // the predicted noise. Used in both directions (inversion and denoising).
  Matrix step(const Matrix& x, const Matrix& eps, int t_from, int t_to) const;

  // Denoising step with DDIM stochasticity eta; `noise` is only read when the
  // step's sigma is non-zero.
  Matrix step_eta(const Matrix& x, const Matrix& eps, int t_from, int t_to, double eta, const Matrix& noise) const;
  double sigma(int t_from, int t_to, double eta) const;

 private:
  int train_timesteps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> alpha_bar_;
};

}  // namespace style3d::diffusion
