#pragma once

#include "style3d/recon/losses.hpp"
#include "style3d/recon/model.hpp"
#include "style3d/recon/render.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace style3d::recon {

struct TrainSchedule {
  int total_steps = 200;
  // Steps spent on the stage-1 loss before switching to stage 2. Negative:
  // half of the run when the data carries depth/normal supervision, else all.
  int stage1_steps = -1;
  double base_lr = 4.0e-5;
  double min_lr = 0.0;

  void validate() const;
};

// Cosine annealing from base_lr at step 0 to min_lr at total_steps.
double learning_rate(const TrainSchedule& s, int step);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainOptions {
  LossWeights weights;
  AdamOptions adam;
  int samples = 32;          // ray samples per pixel
  double sharpness = 0.05;   // density sharpness while training
  double normal_step = 1e-2;
  int reg_resolution = 6;    // lattice used for the regularizer
  const PerceptualDistance* perceptual = nullptr;
  std::optional<std::filesystem::path> checkpoint;  // written after the last step
  std::function<void(int step, const LossReport&)> on_step;
};

struct TrainResult {
  std::vector<LossReport> history;  // one per step, before the update
  std::vector<double> learning_rates;
};

// One forward/backward evaluation of the configured stage on a batch.
LossResult evaluate_loss(const BoundModel& m, const PosedViewBatch& data, int stage, const TrainOptions& opt);

// Adam on every model parameter. Throws NumericalError naming the step and
// loss terms when the loss or a gradient stops being finite.
TrainResult train_loop(ReconModel& model, const PosedViewBatch& data, const TrainSchedule& schedule,
                       const TrainOptions& opt = {});

}  // namespace style3d::recon
