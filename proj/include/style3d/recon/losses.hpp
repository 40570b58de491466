#pragma once

#include "style3d/autodiff.hpp"
#include "style3d/recon/supervision.hpp"

#include <map>
#include <memory>
#include <string>

namespace style3d::recon {

// Image-term weight is fixed at 1. lpips and mask weights are configurable
// defaults, not published values.
struct LossWeights {
  double lpips = 2.0;
  double mask = 1.0;
  double depth = 0.5;
  double normal = 0.2;
  double reg = 0.01;
};

struct LossReport {
  double total = 0.0;
  // image, lpips, mask, depth, normal, reg; unweighted, all >= 0.
  std::map<std::string, double> terms;
  LossWeights weights;
  int stage = 1;

  // image + sum of weight * term over the others.
  double weighted_sum() const;
};

// Pixels of one or more views stacked row-major (view, y, x), one row each.
struct Prediction {
  ad::Var rgb;     // P x 3
  ad::Var mask;    // P x 1
  ad::Var depth;   // P x 1 (stage 2)
  ad::Var normal;  // P x 3 (stage 2)
};

struct Target {
  Matrix rgb;
  Matrix mask;
  Matrix depth;   // empty when absent
  Matrix normal;  // empty when absent
  int width = 0;
  int height = 0;
  int views = 0;
};

// Stacks every view of a batch into targets.
Target make_target(const PosedViewBatch& batch);

// Pluggable perceptual distance between a predicted and a target stack of
// full views. Must be 0 for identical inputs and non-negative otherwise.
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;
  virtual std::string name() const = 0;
  virtual ad::Var distance(const ad::Var& pred, const Matrix& target, int width, int height) const = 0;
};

// Sum of squared differences between horizontal and vertical image gradients.
class GradientDomainDistance final : public PerceptualDistance {
 public:
  std::string name() const override { return "gradient-domain"; }
  ad::Var distance(const ad::Var& pred, const Matrix& target, int width, int height) const override;
};

struct LossResult {
  ad::Var total;
  LossReport report;
};

// sum |I' - I|^2 + w_lpips * P(I', I) + w_mask * sum |M' - M|^2.
// `perceptual` defaults to GradientDomainDistance.
LossResult loss_stage1(const Prediction& pred, const Target& gt, const LossWeights& w = {},
                       const PerceptualDistance* perceptual = nullptr);

// Stage 1 + w_depth * sum M |D' - D| + w_normal * sum M (1 - N'.N) + w_reg * reg.
// Throws ValidationError when depth or normal supervision is missing.
LossResult loss_stage2(const Prediction& pred, const Target& gt, const ad::Var& reg, const LossWeights& w = {},
                       const PerceptualDistance* perceptual = nullptr);

}  // namespace style3d::recon
