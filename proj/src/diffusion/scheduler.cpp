#include "style3d/diffusion/scheduler.hpp"

#include "style3d/error.hpp"

#include <cmath>

namespace style3d::diffusion {

DdimScheduler::DdimScheduler(int train_timesteps, double beta_start, double beta_end)
    : train_timesteps_(train_timesteps), beta_start_(beta_start), beta_end_(beta_end) {
  if (train_timesteps_ < 1) throw ValidationError("scheduler needs at least one training timestep");
  if (!(beta_start_ > 0.0) || !(beta_end_ < 1.0) || beta_start_ > beta_end_) {
    throw ValidationError("scheduler beta range must satisfy 0 < start <= end < 1");
  }
  alpha_bar_.resize(static_cast<std::size_t>(train_timesteps_) + 1);
  alpha_bar_[0] = 1.0;
  const double s0 = std::sqrt(beta_start_), s1 = std::sqrt(beta_end_);
  for (int i = 0; i < train_timesteps_; ++i) {
    const double frac = train_timesteps_ == 1 ? 0.0 : static_cast<double>(i) / (train_timesteps_ - 1);
    const double s = s0 + (s1 - s0) * frac;
    alpha_bar_[i + 1] = alpha_bar_[i] * (1.0 - s * s);
  }
}

double DdimScheduler::alpha_bar(int t) const {
  if (t < 0 || t > train_timesteps_) throw ValidationError("timestep out of schedule range: " + std::to_string(t));
  return alpha_bar_[static_cast<std::size_t>(t)];
}

std::vector<int> DdimScheduler::timesteps(int steps) const {
  if (steps < 0) throw ValidationError("number of steps must be >= 0");
  std::vector<int> ts(static_cast<std::size_t>(steps) + 1, 0);
  for (int k = 1; k <= steps; ++k) {
    ts[k] = static_cast<int>(std::lround(static_cast<double>(k) * train_timesteps_ / steps));
  }
  return ts;
}

Matrix DdimScheduler::step(const Matrix& x, const Matrix& eps, int t_from, int t_to) const {
  const double a_from = alpha_bar(t_from), a_to = alpha_bar(t_to);
  const Matrix x0 = (x - std::sqrt(1.0 - a_from) * eps) / std::sqrt(a_from);
  return std::sqrt(a_to) * x0 + std::sqrt(1.0 - a_to) * eps;
}

double DdimScheduler::sigma(int t_from, int t_to, double eta) const {
  if (eta == 0.0) return 0.0;
  const double a_from = alpha_bar(t_from), a_to = alpha_bar(t_to);
  if (a_to <= a_from) return 0.0;
  return eta * std::sqrt((1.0 - a_to) / (1.0 - a_from)) * std::sqrt(1.0 - a_from / a_to);
}

Matrix DdimScheduler::step_eta(const Matrix& x, const Matrix& eps, int t_from, int t_to, double eta,
                               const Matrix& noise) const {
  const double sig = sigma(t_from, t_to, eta);
  if (sig == 0.0) return step(x, eps, t_from, t_to);
  const double a_from = alpha_bar(t_from), a_to = alpha_bar(t_to);
  const Matrix x0 = (x - std::sqrt(1.0 - a_from) * eps) / std::sqrt(a_from);
  return std::sqrt(a_to) * x0 + std::sqrt(std::max(0.0, 1.0 - a_to - sig * sig)) * eps + sig * noise;
}

}  // namespace style3d::diffusion
