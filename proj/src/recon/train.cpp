#include "style3d/recon/train.hpp"

#include "style3d/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace style3d::recon {

void TrainSchedule::validate() const {
  if (total_steps < 0) throw ValidationError("training needs a non-negative step count");
  if (!(base_lr >= 0.0) || !(min_lr >= 0.0) || min_lr > base_lr) {
    throw ValidationError("learning rates must satisfy 0 <= min_lr <= base_lr");
  }
}

double learning_rate(const TrainSchedule& s, int step) {
  if (step <= 0 || s.total_steps <= 0) return s.base_lr;
  const double progress = std::min(1.0, static_cast<double>(step) / s.total_steps);
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

LossResult evaluate_loss(const BoundModel& m, const PosedViewBatch& data, int stage, const TrainOptions& opt) {
  ad::Tape& t = m.tape();
  const Target gt = make_target(data);
  const ad::Var tokens = encode_views(m, data);
  const auto planes = decode_triplane(m, tokens);
  const ModelField field(m, planes);

  RenderOptions ro;
  ro.width = data.width();
  ro.height = data.height();
  ro.samples = opt.samples;
  ro.sharpness = opt.sharpness;
  ro.normal_step = opt.normal_step;
  ro.normals = stage == 2;
  std::vector<ad::Var> rgb, mask, depth, normal;
  for (const CameraPose& pose : data.cameras) {
    const VolumeRender r = render_volume(t, field, make_camera(pose), ro);
    rgb.push_back(r.rgb);
    mask.push_back(r.mask);
    depth.push_back(r.depth);
    if (stage == 2) normal.push_back(r.normal);
  }
  Prediction pred{ad::concat_rows(rgb), ad::concat_rows(mask), ad::concat_rows(depth), {}};
  if (stage == 1) return loss_stage1(pred, gt, opt.weights, opt.perceptual);
  pred.normal = ad::concat_rows(normal);
  const ad::Var reg = regularizer_term(m, planes, lattice_vertices(opt.reg_resolution),
                                       lattice_cell_centers(opt.reg_resolution));
  return loss_stage2(pred, gt, reg, opt.weights, opt.perceptual);
}

TrainResult train_loop(ReconModel& model, const PosedViewBatch& data, const TrainSchedule& schedule,
                       const TrainOptions& opt) {
  schedule.validate();
  data.validate();
  int stage1 = schedule.stage1_steps;
  if (stage1 < 0) stage1 = data.has_geometry() ? schedule.total_steps / 2 : schedule.total_steps;
  if (stage1 < schedule.total_steps && !data.has_geometry()) {
    throw ValidationError("stage-2 training needs depth and normal supervision");
  }

  auto& params = model.parameters();
  std::vector<Matrix> m1, m2;
  for (const auto& [name, p] : params) {
    m1.push_back(Matrix::Zero(p.rows(), p.cols()));
    m2.push_back(Matrix::Zero(p.rows(), p.cols()));
  }

  TrainResult result;
  for (int step = 0; step < schedule.total_steps; ++step) {
    const int stage = step < stage1 ? 1 : 2;
    ad::Tape tape;
    const BoundModel bound(model, tape, true);
    const LossResult loss = evaluate_loss(bound, data, stage, opt);
    if (!std::isfinite(loss.report.total)) {
      std::string terms;
      for (const auto& [k, v] : loss.report.terms) terms += fmt::format(" {}={}", k, v);
      throw NumericalError(fmt::format("non-finite stage-{} loss at step {}:{}", stage, step, terms));
    }
    tape.backward(loss.total);

    const double lr = learning_rate(schedule, step);
    const double bc1 = 1.0 - std::pow(opt.adam.beta1, step + 1);
    const double bc2 = 1.0 - std::pow(opt.adam.beta2, step + 1);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix& g = bound.vars()[i].grad();
      if (g.size() == 0) continue;
      if (!g.allFinite()) {
        throw NumericalError(fmt::format("non-finite gradient for {} at step {}", params[i].first, step));
      }
      m1[i] = opt.adam.beta1 * m1[i] + (1.0 - opt.adam.beta1) * g;
      m2[i] = opt.adam.beta2 * m2[i] + (1.0 - opt.adam.beta2) * g.cwiseProduct(g);
      const Matrix update =
          (m1[i] / bc1).array() / ((m2[i] / bc2).array().sqrt() + opt.adam.eps);
      params[i].second -= lr * update;
    }
    result.history.push_back(loss.report);
    result.learning_rates.push_back(lr);
    if (opt.on_step) opt.on_step(step, loss.report);
  }
  if (opt.checkpoint) model.save(*opt.checkpoint);
  return result;
}

}  // namespace style3d::recon
