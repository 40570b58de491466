#include "style3d/recon/render.hpp"

#include "style3d/error.hpp"
#include "style3d/mesh/flexicubes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace style3d::recon {
namespace {

// Slab test against [-1, 1]^3. Returns false when the ray misses.
bool clip_to_box(const Vec3& o, const Vec3& d, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < -1.0 || o[k] > 1.0) return false;
      continue;
    }
    double a = (-1.0 - o[k]) / d[k], b = (1.0 - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return t1 > t0;
}

Matrix clamp_box(Matrix p) { return p.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace

AnalyticField::AnalyticField(std::function<double(const Vec3&)> sdf, std::function<Vec3(const Vec3&)> color,
                             mesh::SignConvention convention)
    : sdf_(std::move(sdf)), color_(std::move(color)), convention_(convention) {}

ad::Var AnalyticField::sdf(ad::Tape& tape, const Matrix& points) const {
  Matrix v(points.rows(), 1);
  for (Eigen::Index i = 0; i < points.rows(); ++i) v(i, 0) = sdf_(points.row(i).transpose());
  return tape.constant(std::move(v));
}

ad::Var AnalyticField::color(ad::Tape& tape, const Matrix& points) const {
  Matrix v(points.rows(), 3);
  for (Eigen::Index i = 0; i < points.rows(); ++i) v.row(i) = color_(points.row(i).transpose()).transpose();
  return tape.constant(std::move(v));
}

ModelField::ModelField(const BoundModel& model, std::array<ad::Var, 3> planes)
    : model_(model), planes_(std::move(planes)) {}

ad::Var ModelField::sdf(ad::Tape&, const Matrix& points) const {
  return query_points(model_, planes_, points, kSdfHead).sdf;
}

ad::Var ModelField::color(ad::Tape&, const Matrix& points) const {
  return query_points(model_, planes_, points, kColorHead).color;
}

VolumeRender render_volume(ad::Tape& tape, const Field& field, const Camera& cam, const RenderOptions& opt) {
  if (opt.samples < 1) throw ValidationError("render needs at least one sample per ray");
  if (!(opt.sharpness > 0.0)) throw ValidationError("render sharpness must be positive");
  const Rays all = generate_rays(cam, opt.width, opt.height);
  std::vector<int> pix = opt.pixels;
  if (pix.empty()) {
    pix.resize(static_cast<std::size_t>(all.origins.rows()));
    for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<int>(i);
  }
  const Eigen::Index P = static_cast<Eigen::Index>(pix.size()), S = opt.samples;

  // SDF is read at the S + 1 interval boundaries, color, depth and normals at
  // the S interval midpoints.
  Matrix bounds(P * (S + 1), 3), points(P * S, 3);
  Matrix depth_at(P, S);
  for (Eigen::Index r = 0; r < P; ++r) {
    if (pix[r] < 0 || pix[r] >= all.origins.rows()) throw ValidationError("render pixel index out of range");
    const Vec3 o = all.origins.row(pix[r]).transpose(), d = all.directions.row(pix[r]).transpose();
    double t0, t1;
    const bool hit = clip_to_box(o, d, t0, t1);
    const double dt = hit ? (t1 - t0) / S : 0.0;
    for (Eigen::Index s = 0; s <= S; ++s) {
      bounds.row(r * (S + 1) + s) = hit ? clamp_box(Matrix((o + (t0 + s * dt) * d).transpose())) : Matrix::Zero(1, 3);
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      const double t = hit ? t0 + (s + 0.5) * dt : 0.0;
      points.row(r * S + s) = hit ? clamp_box(Matrix((o + t * d).transpose())) : Matrix::Zero(1, 3);
      depth_at(r, s) = t * all.forward_cos(pix[r]);
    }
  }

  // Opacity from the logistic CDF of the outside distance between consecutive
  // boundaries: alpha = max((Phi_i - Phi_i+1) / Phi_i, 0). Grazing rays stay
  // transparent, so the silhouette is not inflated by the density falloff.
  const double sign = field.convention() == mesh::SignConvention::positive_inside ? 1.0 : -1.0;
  const double b = opt.sharpness;
  const ad::Var phi = ad::sigmoid(ad::scale(ad::reshape(field.sdf(tape, bounds), P, S + 1), -sign / b));
  const ad::Var phi_a = ad::slice_cols(phi, 0, S), phi_b = ad::slice_cols(phi, 1, S);
  const ad::Var alpha = ad::relu((phi_a - phi_b) / ad::add_scalar(phi_a, 1e-12));
  const ad::Var log_keep = ad::log(ad::add_scalar(-alpha, 1.0 + 1e-10));
  const ad::Var trans = ad::exp(ad::exclusive_cumsum_rows(log_keep));
  const ad::Var w = trans * alpha;

  VolumeRender out;
  out.mask = ad::row_sum(w);
  const ad::Var color = field.color(tape, points);
  std::array<ad::Var, 3> channels;
  const ad::Var empty = ad::add_scalar(-out.mask, 1.0);
  for (int c = 0; c < 3; ++c) {
    const ad::Var cc = ad::reshape(ad::slice_cols(color, c, 1), P, S);
    channels[c] = ad::row_sum(w * cc) + ad::scale(empty, opt.background[c]);
  }
  out.rgb = ad::concat_cols(channels);
  out.depth = ad::row_sum(w * tape.constant(depth_at)) / ad::add_scalar(out.mask, 1e-6);

  if (opt.normals) {
    // Outward normal is the gradient of the standard (negative inside) distance.
    const double h = opt.normal_step;
    std::array<ad::Var, 3> grad;
    for (int k = 0; k < 3; ++k) {
      Matrix plus = points, minus = points;
      plus.col(k).array() += h;
      minus.col(k).array() -= h;
      const ad::Var diff = field.sdf(tape, clamp_box(plus)) - field.sdf(tape, clamp_box(minus));
      grad[k] = ad::scale(diff, -sign / (2.0 * h));
    }
    const ad::Var g = ad::concat_cols(grad);
    auto normalize_rows = [&](const ad::Var& v) {
      const ad::Var len = ad::sqrt(ad::add_scalar(ad::row_sum(ad::square(v)), 1e-12));
      return ad::mul_col(v, tape.constant(Matrix::Ones(v.rows(), 1)) / len);
    };
    const ad::Var n = normalize_rows(g);
    std::array<ad::Var, 3> acc;
    for (int c = 0; c < 3; ++c) acc[c] = ad::row_sum(w * ad::reshape(ad::slice_cols(n, c, 1), P, S));
    out.normal = normalize_rows(ad::concat_cols(acc));
  }
  return out;
}

RenderedView to_view(const VolumeRender& r, int width, int height) {
  const Eigen::Index P = static_cast<Eigen::Index>(width) * height;
  if (r.rgb.rows() != P) throw ValidationError("to_view needs a full-frame render");
  RenderedView v{Image(width, height, 3), Image(width, height, 1), Image(width, height, 1), Image(width, height, 3)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * width + x;
      const double m = r.mask.value()(i, 0);
      v.mask.at(x, y, 0) = m;
      v.depth.at(x, y, 0) = m > 1e-6 ? r.depth.value()(i, 0) : 0.0;
      for (int c = 0; c < 3; ++c) {
        v.rgb.at(x, y, c) = r.rgb.value()(i, c);
        v.normal.at(x, y, c) = r.normal.valid() && m > 1e-6 ? r.normal.value()(i, c) : 0.0;
      }
    }
  return v;
}

RenderedView rasterize_mesh(const mesh::MeshResult& mesh, const Camera& cam, int width, int height,
                            const Vec3& background) {
  RenderedView v{Image(width, height, 3), Image(width, height, 1), Image(width, height, 1), Image(width, height, 3)};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) v.rgb.at(x, y, c) = background[c];
  std::vector<double> zbuf(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity());
  std::vector<Eigen::Vector3d> proj(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) proj[i] = project(cam, mesh.vertices[i], width, height);

  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d &a = proj[f[0]], &b = proj[f[1]], &c = proj[f[2]];
    if (a.z() <= 1e-6 || b.z() <= 1e-6 || c.z() <= 1e-6) continue;
    const double area = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(area) < 1e-14) continue;
    const Vec3 fn = (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).normalized();
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}))));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}))));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double w0 = ((b.x() - px) * (c.y() - py) - (b.y() - py) * (c.x() - px)) / area;
        const double w1 = ((c.x() - px) * (a.y() - py) - (c.y() - py) * (a.x() - px)) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        // Perspective-correct weights.
        const double i0 = w0 / a.z(), i1 = w1 / b.z(), i2 = w2 / c.z();
        const double inv = i0 + i1 + i2;
        const double z = 1.0 / inv;
        const std::size_t k = static_cast<std::size_t>(y) * width + x;
        if (z >= zbuf[k]) continue;
        zbuf[k] = z;
        const Vec3 col = mesh.colors.size() == mesh.vertices.size()
                             ? Vec3((i0 * mesh.colors[f[0]] + i1 * mesh.colors[f[1]] + i2 * mesh.colors[f[2]]) / inv)
                             : Vec3(0.5, 0.5, 0.5);
        v.mask.at(x, y, 0) = 1.0;
        v.depth.at(x, y, 0) = z;
        for (int ch = 0; ch < 3; ++ch) {
          v.rgb.at(x, y, ch) = col[ch];
          v.normal.at(x, y, ch) = fn[ch];
        }
      }
  }
  return v;
}

std::vector<RenderedView> render_views(const ReconModel& model, const Triplane& tp,
                                       const std::vector<CameraPose>& cameras, RenderMode mode,
                                       const RenderOptions& opt) {
  tp.validate();
  std::vector<RenderedView> out;
  if (mode == RenderMode::mesh) {
    const mesh::MeshResult mesh = extract_colored_mesh(model, tp);
    for (const CameraPose& pose : cameras) {
      out.push_back(rasterize_mesh(mesh, make_camera(pose), opt.width, opt.height, opt.background));
    }
    return out;
  }
  for (const CameraPose& pose : cameras) {
    const Camera cam = make_camera(pose);
    ad::Tape t;
    const BoundModel m(model, t, false);
    const ModelField field(m, {t.constant(tp.planes[0]), t.constant(tp.planes[1]), t.constant(tp.planes[2])});
    RenderOptions full = opt;
    full.pixels.clear();
    out.push_back(to_view(render_volume(t, field, cam, full), opt.width, opt.height));
  }
  return out;
}

}  // namespace style3d::recon
