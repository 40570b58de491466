#include "style3d/recon/model.hpp"

#include "style3d/checkpoint.hpp"
#include "style3d/error.hpp"
#include "style3d/recon/camera.hpp"
#include "style3d/rng.hpp"

#include <cmath>
#include <numbers>

namespace style3d::recon {
namespace {

constexpr const char* kArchitecture = "triplane-recon-lite";

// 2-D sinusoidal code for a gh x gw patch grid, width dim (multiple of 4).
Matrix patch_position_code(int gh, int gw, int dim) {
  Matrix code(static_cast<Eigen::Index>(gh) * gw, dim);
  const int quarter = dim / 4;
  for (int r = 0; r < gh; ++r)
    for (int c = 0; c < gw; ++c)
      for (int j = 0; j < quarter; ++j) {
        const double f = 1.0 / std::pow(10000.0, static_cast<double>(j) / quarter);
        const Eigen::Index row = static_cast<Eigen::Index>(r) * gw + c;
        code(row, 4 * j) = std::sin(r * f);
        code(row, 4 * j + 1) = std::cos(r * f);
        code(row, 4 * j + 2) = std::sin(c * f);
        code(row, 4 * j + 3) = std::cos(c * f);
      }
  return code;
}

Matrix patchify(const Image& img, int p) {
  const int gh = img.height / p, gw = img.width / p;
  Matrix out(static_cast<Eigen::Index>(gh) * gw, 3 * p * p);
  for (int py = 0; py < gh; ++py)
    for (int px = 0; px < gw; ++px)
      for (int dy = 0; dy < p; ++dy)
        for (int dx = 0; dx < p; ++dx)
          for (int c = 0; c < 3; ++c)
            out(static_cast<Eigen::Index>(py) * gw + px, (dy * p + dx) * 3 + c) =
                2.0 * img.at(px * p + dx, py * p + dy, c) - 1.0;
  return out;
}

Matrix fibonacci_directions(int n) {
  Matrix d(3, n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < n; ++k) {
    const double y = 1.0 - 2.0 * (k + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    d(0, k) = r * std::cos(golden * k);
    d(1, k) = y;
    d(2, k) = r * std::sin(golden * k);
  }
  return d;
}

ad::Var dense(const ad::Var& x, const ad::Var& w, const ad::Var& b) { return ad::add_row(ad::matmul(x, w), b); }

}  // namespace

void ReconConfig::validate() const {
  if (patch_size < 1) throw ValidationError("patch size must be positive");
  if (token_dim < 4 || token_dim % 4 != 0) throw ValidationError("token width must be a positive multiple of 4");
  if (triplane_resolution < 2) throw ValidationError("triplane resolution must be >= 2");
  if (triplane_channels < 1 || hidden < 1) throw ValidationError("channel and hidden widths must be positive");
  if (grid_resolution < 2) throw ValidationError("grid resolution must be >= 2");
  if (!(init_radius > 0.0 && init_radius < 1.0)) throw ValidationError("initial radius must lie in (0, 1)");
}

ReconModel::ReconModel(ReconConfig config) : config_(config) {
  config_.validate();
  const int D = config_.token_dim, p = config_.patch_size, R = config_.triplane_resolution;
  const int C = config_.triplane_channels, H = config_.hidden, F = 3 * C;
  Rng rng(config_.seed);
  auto add = [&](const std::string& name, Matrix m) { params_.emplace_back(name, std::move(m)); };
  auto randn = [&](int r, int c) { return rng.normal_matrix(r, c, 1.0 / std::sqrt(static_cast<double>(r))); };

  add("enc.patch.w", randn(3 * p * p, D));
  add("enc.patch.b", Matrix::Zero(1, D));
  add("enc.ada.scale.w", Matrix::Zero(6, D));
  add("enc.ada.scale.b", Matrix::Zero(1, D));
  add("enc.ada.shift.w", Matrix::Zero(6, D));
  add("enc.ada.shift.b", Matrix::Zero(1, D));
  add("enc.mlp.w1", randn(D, D));
  add("enc.mlp.b1", Matrix::Zero(1, D));
  add("enc.mlp.w2", 0.5 * randn(D, D));
  add("enc.mlp.b2", Matrix::Zero(1, D));

  Matrix queries(3 * R * R, D);
  const Matrix plane_embed = rng.normal_matrix(3, D, 0.5);
  for (int a = 0; a < 3; ++a)
    for (int v = 0; v < R; ++v)
      for (int u = 0; u < R; ++u) {
        const Eigen::Index row = static_cast<Eigen::Index>(a) * R * R + v * R + u;
        const double cu = -1.0 + 2.0 * u / (R - 1), cv = -1.0 + 2.0 * v / (R - 1);
        for (int j = 0; j < D / 4; ++j) {
          const double f = std::numbers::pi * std::pow(2.0, j % 4) / 2.0;
          queries(row, 4 * j) = std::sin(cu * f);
          queries(row, 4 * j + 1) = std::cos(cu * f);
          queries(row, 4 * j + 2) = std::sin(cv * f);
          queries(row, 4 * j + 3) = std::cos(cv * f);
        }
        queries.row(row) = 0.5 * queries.row(row) + plane_embed.row(a);
      }
  add("dec.queries", queries + rng.normal_matrix(3 * R * R, D, 0.02));
  add("dec.wq", randn(D, D));
  add("dec.wk", randn(D, D));
  add("dec.wv", randn(D, D));
  add("dec.wo", randn(D, C));
  add("dec.bo", Matrix::Zero(1, C));

  // Geometric init: with unit directions u_k, mean_k relu(u_k . x) ~ |x| / 4,
  // so the head starts as r - |x| (or its negation).
  const double sign = config_.convention == mesh::SignConvention::positive_inside ? 1.0 : -1.0;
  Matrix sdf_w1 = Matrix::Zero(3 + F, H);
  sdf_w1.topRows(3) = fibonacci_directions(H);
  add("sdf.w1", sdf_w1);
  add("sdf.b1", Matrix::Zero(1, H));
  add("sdf.w2", Matrix::Constant(H, 1, -sign * 4.0 / H));
  add("sdf.b2", Matrix::Constant(1, 1, sign * config_.init_radius));

  add("rgb.w1", randn(3 + F, H));
  add("rgb.b1", Matrix::Zero(1, H));
  add("rgb.w2", randn(H, 3));
  add("rgb.b2", Matrix::Zero(1, 3));
  add("def.w", Matrix::Zero(F, 3));
  add("def.b", Matrix::Zero(1, 3));
  add("wgt.w", Matrix::Zero(F, mesh::CellWeights::kCount));
  add("wgt.b", Matrix::Zero(1, mesh::CellWeights::kCount));
}

const Matrix& ReconModel::param(const std::string& name) const {
  for (const auto& [n, m] : params_)
    if (n == name) return m;
  throw ValidationError("unknown reconstruction parameter " + name);
}

Matrix& ReconModel::param(const std::string& name) {
  return const_cast<Matrix&>(static_cast<const ReconModel&>(*this).param(name));
}

std::size_t ReconModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : params_) n += static_cast<std::size_t>(m.size());
  return n;
}

void ReconModel::save(const std::filesystem::path& path) const {
  Checkpoint ck;
  ck.meta = {{"architecture", kArchitecture},
             {"patch_size", config_.patch_size},
             {"token_dim", config_.token_dim},
             {"triplane_resolution", config_.triplane_resolution},
             {"triplane_channels", config_.triplane_channels},
             {"hidden", config_.hidden},
             {"grid_resolution", config_.grid_resolution},
             {"init_radius", config_.init_radius},
             {"sign_convention",
              config_.convention == mesh::SignConvention::positive_inside ? "positive_inside" : "negative_inside"}};
  ck.tensors = params_;
  save_checkpoint(path, ck);
}

ReconModel ReconModel::load(const std::filesystem::path& path) {
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const Error& e) {
    throw BackendError("cannot load reconstruction weights: " + std::string(e.what()));
  }
  try {
    if (ck.meta.at("architecture") != kArchitecture) {
      throw BackendError(path.string() + " is not a reconstruction checkpoint");
    }
    ReconConfig cfg;
    cfg.patch_size = ck.meta.at("patch_size");
    cfg.token_dim = ck.meta.at("token_dim");
    cfg.triplane_resolution = ck.meta.at("triplane_resolution");
    cfg.triplane_channels = ck.meta.at("triplane_channels");
    cfg.hidden = ck.meta.at("hidden");
    cfg.grid_resolution = ck.meta.at("grid_resolution");
    cfg.init_radius = ck.meta.at("init_radius");
    cfg.convention = ck.meta.at("sign_convention") == "positive_inside" ? mesh::SignConvention::positive_inside
                                                                         : mesh::SignConvention::negative_inside;
    ReconModel model(cfg);
    for (auto& [name, m] : model.params_) {
      const Matrix& stored = ck.get(name);
      if (stored.rows() != m.rows() || stored.cols() != m.cols()) {
        throw BackendError("parameter " + name + " has shape " + shape_string(stored) + ", expected " +
                           shape_string(m));
      }
      m = stored;
    }
    return model;
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError("invalid reconstruction checkpoint " + path.string() + ": " + e.what());
  }
}

BoundModel::BoundModel(const ReconModel& model, ad::Tape& tape, bool trainable) : model_(model), tape_(tape) {
  vars_.reserve(model.parameters().size());
  for (const auto& [name, m] : model.parameters()) vars_.push_back(trainable ? tape.leaf(m) : tape.constant(m));
}

const ad::Var& BoundModel::operator[](const std::string& name) const {
  const auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].first == name) return vars_[i];
  throw ValidationError("unknown reconstruction parameter " + name);
}

ad::Var encode_views(const BoundModel& m, const PosedViewBatch& batch, const EncodeOptions& opt) {
  const ReconConfig& cfg = m.model().config();
  const int p = cfg.patch_size;
  if (batch.images.empty()) throw ValidationError("encode_views: empty batch");
  if (batch.cameras.size() != batch.images.size()) throw ValidationError("encode_views: one camera per view required");
  ad::Tape& t = m.tape();
  std::vector<ad::Var> blocks;
  for (std::size_t v = 0; v < batch.images.size(); ++v) {
    const Image& img = batch.images[v];
    if (img.channels != 3) throw ValidationError("encode_views expects RGB views");
    if (img.width % p != 0 || img.height % p != 0) {
      throw ValidationError("view resolution " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            " is not divisible by patch size " + std::to_string(p));
    }
    const ad::Var patches = t.constant(patchify(img, p));
    const ad::Var pos = t.constant(patch_position_code(img.height / p, img.width / p, cfg.token_dim));
    ad::Var x = dense(patches, m["enc.patch.w"], m["enc.patch.b"]) + pos;
    ad::Var y = ad::layer_norm_rows(x);
    if (opt.modulate) {
      const ad::Var code = t.constant(pose_code(batch.cameras[v]));
      const ad::Var scale = dense(code, m["enc.ada.scale.w"], m["enc.ada.scale.b"]);
      const ad::Var shift = dense(code, m["enc.ada.shift.w"], m["enc.ada.shift.b"]);
      y = ad::add_row(ad::mul_row(y, ad::add_scalar(scale, 1.0)), shift);
    }
    const ad::Var h = ad::relu(dense(y, m["enc.mlp.w1"], m["enc.mlp.b1"]));
    blocks.push_back(y + dense(h, m["enc.mlp.w2"], m["enc.mlp.b2"]));
  }
  return ad::concat_rows(blocks);
}

Matrix encode_views(const ReconModel& model, const PosedViewBatch& batch, const EncodeOptions& opt) {
  ad::Tape t;
  return encode_views(BoundModel(model, t, false), batch, opt).value();
}

std::array<ad::Var, 3> decode_triplane(const BoundModel& m, const ad::Var& tokens) {
  const ReconConfig& cfg = m.model().config();
  if (tokens.cols() != cfg.token_dim) {
    throw ValidationError("decode_triplane: token width " + std::to_string(tokens.cols()) + ", expected " +
                          std::to_string(cfg.token_dim));
  }
  const ad::Var& q = m["dec.queries"];
  const ad::Var qh = ad::matmul(q, m["dec.wq"]);
  const ad::Var k = ad::matmul(tokens, m["dec.wk"]);
  const ad::Var v = ad::matmul(tokens, m["dec.wv"]);
  const ad::Var a = ad::softmax_rows(ad::scale(ad::matmul_transposed(qh, k), 1.0 / std::sqrt(cfg.token_dim)));
  const ad::Var out = dense(q + ad::matmul(a, v), m["dec.wo"], m["dec.bo"]);
  const Eigen::Index rr = static_cast<Eigen::Index>(cfg.triplane_resolution) * cfg.triplane_resolution;
  return {ad::slice_rows(out, 0, rr), ad::slice_rows(out, rr, rr), ad::slice_rows(out, 2 * rr, rr)};
}

Triplane decode_triplane(const ReconModel& model, const Matrix& tokens) {
  ad::Tape t;
  const auto planes = decode_triplane(BoundModel(model, t, false), t.constant(tokens));
  Triplane tp;
  tp.resolution = model.config().triplane_resolution;
  tp.channels = model.config().triplane_channels;
  for (int a = 0; a < 3; ++a) tp.planes[a] = planes[a].value();
  return tp;
}

FieldOutputs query_points(const BoundModel& m, const std::array<ad::Var, 3>& planes, const Matrix& points,
                          unsigned heads) {
  const ReconConfig& cfg = m.model().config();
  ad::Tape& t = m.tape();
  const ad::Var feat = sample_triplane(planes, cfg.triplane_resolution, points);
  if (!all_finite(feat.value())) throw NumericalError("triplane features are not finite");
  FieldOutputs out;
  if (heads & (kSdfHead | kColorHead)) {
    const std::array parts{t.constant(points), feat};
    const ad::Var in = ad::concat_cols(parts);
    if (heads & kSdfHead) {
      out.sdf = dense(ad::relu(dense(in, m["sdf.w1"], m["sdf.b1"])), m["sdf.w2"], m["sdf.b2"]);
    }
    if (heads & kColorHead) {
      out.color = ad::sigmoid(dense(ad::relu(dense(in, m["rgb.w1"], m["rgb.b1"])), m["rgb.w2"], m["rgb.b2"]));
    }
  }
  if (heads & kDeformationHead) {
    out.deformation = ad::scale(ad::tanh(dense(feat, m["def.w"], m["def.b"])), 0.5 * m.model().grid_cell());
  }
  if (heads & kWeightHead) {
    out.weights = ad::add_scalar(ad::scale(ad::tanh(dense(feat, m["wgt.w"], m["wgt.b"])), 0.99), 1.0);
  }
  return out;
}

FieldSample query_field(const ReconModel& model, const Triplane& tp, const Vec3& xyz) {
  tp.validate();
  ad::Tape t;
  const BoundModel m(model, t, false);
  const std::array planes{t.constant(tp.planes[0]), t.constant(tp.planes[1]), t.constant(tp.planes[2])};
  const FieldOutputs o = query_points(m, planes, Matrix(xyz.transpose()));
  FieldSample s;
  s.sdf = o.sdf.scalar();
  s.color = o.color.value().row(0).transpose();
  s.deformation = o.deformation.value().row(0).transpose();
  for (int k = 0; k < mesh::CellWeights::kCount; ++k) s.weights[k] = o.weights.value()(0, k);
  return s;
}

ad::Var regularizer_term(const BoundModel& m, const std::array<ad::Var, 3>& planes, const Matrix& points,
                         const Matrix& cell_centers) {
  const double cell = m.model().grid_cell();
  const FieldOutputs d = query_points(m, planes, points, kDeformationHead);
  const FieldOutputs w = query_points(m, planes, cell_centers, kWeightHead);
  const ad::Var def = ad::scale(ad::sum(ad::square(d.deformation)), 1.0 / (cell * cell * points.rows()));
  return def + ad::mean(ad::square(ad::add_scalar(w.weights, -1.0)));
}

Matrix lattice_vertices(int n) {
  const int k = n + 1;
  Matrix p(static_cast<Eigen::Index>(k) * k * k, 3);
  const double h = 2.0 / n;
  Eigen::Index i = 0;
  for (int z = 0; z < k; ++z)
    for (int y = 0; y < k; ++y)
      for (int x = 0; x < k; ++x) p.row(i++) << -1.0 + h * x, -1.0 + h * y, -1.0 + h * z;
  return p;
}

Matrix lattice_cell_centers(int n) {
  Matrix p(static_cast<Eigen::Index>(n) * n * n, 3);
  const double h = 2.0 / n;
  Eigen::Index i = 0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) p.row(i++) << -1.0 + h * (x + 0.5), -1.0 + h * (y + 0.5), -1.0 + h * (z + 0.5);
  return p;
}

mesh::SdfGrid build_sdf_grid(const ReconModel& model, const Triplane& tp) {
  tp.validate();
  const ReconConfig& cfg = model.config();
  ad::Tape t;
  const BoundModel m(model, t, false);
  const std::array planes{t.constant(tp.planes[0]), t.constant(tp.planes[1]), t.constant(tp.planes[2])};
  mesh::SdfGrid grid(cfg.grid_resolution, cfg.convention);
  const FieldOutputs v = query_points(m, planes, lattice_vertices(cfg.grid_resolution), kSdfHead | kDeformationHead);
  const FieldOutputs c = query_points(m, planes, lattice_cell_centers(cfg.grid_resolution), kWeightHead);
  for (std::size_t i = 0; i < grid.vertex_count(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    grid.values[i] = v.sdf.value()(r, 0);
    grid.deformations[i] = v.deformation.value().row(r).transpose();
  }
  for (std::size_t i = 0; i < grid.cell_count(); ++i)
    for (int k = 0; k < mesh::CellWeights::kCount; ++k) grid.weights[i][k] = c.weights.value()(static_cast<Eigen::Index>(i), k);
  grid.clamp_deformations();
  return grid;
}

mesh::MeshResult extract_colored_mesh(const ReconModel& model, const Triplane& tp) {
  mesh::MeshResult mesh = mesh::extract_mesh(build_sdf_grid(model, tp));
  if (mesh.vertices.empty()) return mesh;
  Matrix pts(static_cast<Eigen::Index>(mesh.vertices.size()), 3);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    pts.row(static_cast<Eigen::Index>(i)) = mesh.vertices[i].cwiseMax(-1.0).cwiseMin(1.0).transpose();
  ad::Tape t;
  const BoundModel m(model, t, false);
  const std::array planes{t.constant(tp.planes[0]), t.constant(tp.planes[1]), t.constant(tp.planes[2])};
  const Matrix colors = query_points(m, planes, pts, kColorHead).color.value();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) mesh.colors[i] = colors.row(static_cast<Eigen::Index>(i)).transpose();
  return mesh;
}

}  // namespace style3d::recon
