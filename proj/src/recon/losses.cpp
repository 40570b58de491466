#include "style3d/recon/losses.hpp"

#include "style3d/error.hpp"

#include <cmath>

namespace style3d::recon {
namespace {

void expect_shape(const ad::Var& v, const Matrix& m, const char* what) {
  if (!v.valid()) throw ValidationError(std::string("prediction is missing ") + what);
  if (v.rows() != m.rows() || v.cols() != m.cols()) {
    throw ValidationError(std::string(what) + " shape mismatch: predicted " + shape_string(v.value()) + ", target " +
                          shape_string(m));
  }
}

Matrix stack(const std::vector<Image>& imgs) {
  if (imgs.empty()) return {};
  const Eigen::Index per = static_cast<Eigen::Index>(imgs[0].width) * imgs[0].height;
  Matrix m(per * static_cast<Eigen::Index>(imgs.size()), imgs[0].channels);
  for (std::size_t v = 0; v < imgs.size(); ++v)
    for (Eigen::Index i = 0; i < per; ++i)
      for (int c = 0; c < imgs[v].channels; ++c)
        m(static_cast<Eigen::Index>(v) * per + i, c) = imgs[v].pixels[static_cast<std::size_t>(i) * imgs[v].channels + c];
  return m;
}

// Forward differences inside each view: rows are (x+1) - x then (y+1) - y.
ad::SparseMatrix difference_operator(int width, int height, int views) {
  std::vector<Eigen::Triplet<double>> trips;
  int row = 0;
  const int per = width * height;
  for (int v = 0; v < views; ++v) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x + 1 < width; ++x, ++row) {
        trips.emplace_back(row, v * per + y * width + x + 1, 1.0);
        trips.emplace_back(row, v * per + y * width + x, -1.0);
      }
    for (int y = 0; y + 1 < height; ++y)
      for (int x = 0; x < width; ++x, ++row) {
        trips.emplace_back(row, v * per + (y + 1) * width + x, 1.0);
        trips.emplace_back(row, v * per + y * width + x, -1.0);
      }
  }
  ad::SparseMatrix d(row, static_cast<Eigen::Index>(per) * views);
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

}  // namespace

double LossReport::weighted_sum() const {
  auto term = [&](const char* k) {
    const auto it = terms.find(k);
    return it == terms.end() ? 0.0 : it->second;
  };
  return term("image") + weights.lpips * term("lpips") + weights.mask * term("mask") + weights.depth * term("depth") +
         weights.normal * term("normal") + weights.reg * term("reg");
}

Target make_target(const PosedViewBatch& batch) {
  batch.validate();
  Target t;
  t.width = batch.width();
  t.height = batch.height();
  t.views = batch.size();
  t.rgb = stack(batch.images);
  t.mask = stack(batch.masks);
  if (batch.has_geometry()) {
    t.depth = stack(batch.depths);
    t.normal = stack(batch.normals);
  }
  return t;
}

ad::Var GradientDomainDistance::distance(const ad::Var& pred, const Matrix& target, int width, int height) const {
  const Eigen::Index per = static_cast<Eigen::Index>(width) * height;
  if (per == 0 || pred.rows() % per != 0 || pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ValidationError("perceptual distance needs whole views of matching shape");
  }
  const ad::SparseMatrix d = difference_operator(width, height, static_cast<int>(pred.rows() / per));
  const ad::Var diff = ad::sparse_left(d, pred) - pred.tape()->constant(Matrix(d * target));
  return ad::sum(ad::square(diff));
}

LossResult loss_stage1(const Prediction& pred, const Target& gt, const LossWeights& w,
                       const PerceptualDistance* perceptual) {
  expect_shape(pred.rgb, gt.rgb, "rgb");
  expect_shape(pred.mask, gt.mask, "mask");
  ad::Tape& t = *pred.rgb.tape();
  const GradientDomainDistance fallback;
  const PerceptualDistance& pd = perceptual ? *perceptual : fallback;

  const ad::Var image = ad::sum(ad::square(pred.rgb - t.constant(gt.rgb)));
  const ad::Var lpips = pd.distance(pred.rgb, gt.rgb, gt.width, gt.height);
  const ad::Var mask = ad::sum(ad::square(pred.mask - t.constant(gt.mask)));

  LossResult r;
  r.total = image + ad::scale(lpips, w.lpips) + ad::scale(mask, w.mask);
  r.report.weights = w;
  r.report.stage = 1;
  r.report.terms = {{"image", image.scalar()}, {"lpips", lpips.scalar()}, {"mask", mask.scalar()},
                    {"depth", 0.0},            {"normal", 0.0},          {"reg", 0.0}};
  r.report.total = r.total.scalar();
  return r;
}

LossResult loss_stage2(const Prediction& pred, const Target& gt, const ad::Var& reg, const LossWeights& w,
                       const PerceptualDistance* perceptual) {
  if (gt.depth.size() == 0 || gt.normal.size() == 0) {
    throw ValidationError("stage-2 loss needs depth and normal supervision");
  }
  if (!reg.valid() || reg.rows() != 1 || reg.cols() != 1) throw ValidationError("stage-2 loss needs a scalar regularizer");
  expect_shape(pred.depth, gt.depth, "depth");
  expect_shape(pred.normal, gt.normal, "normal");
  LossResult r = loss_stage1(pred, gt, w, perceptual);
  ad::Tape& t = *pred.rgb.tape();
  const ad::Var m = t.constant(gt.mask);

  const ad::Var depth = ad::sum(m * ad::abs(pred.depth - t.constant(gt.depth)));
  const ad::Var cosine = ad::row_sum(pred.normal * t.constant(gt.normal));
  const ad::Var normal = ad::sum(m * ad::add_scalar(-cosine, 1.0));

  r.total = r.total + ad::scale(depth, w.depth) + ad::scale(normal, w.normal) + ad::scale(reg, w.reg);
  r.report.stage = 2;
  r.report.terms["depth"] = depth.scalar();
  r.report.terms["normal"] = normal.scalar();
  r.report.terms["reg"] = reg.scalar();
  r.report.total = r.total.scalar();
  return r;
}

}  // namespace style3d::recon
