#pragma once

#include "style3d/autodiff.hpp"
#include "style3d/mesh/mesh.hpp"
#include "style3d/mesh/sdf_grid.hpp"
#include "style3d/recon/camera.hpp"
#include "style3d/recon/model.hpp"

#include <functional>
#include <vector>

namespace style3d::recon {

// Anything the renderer can march through: a signed distance (in its own sign
// convention) and a color per point.
class Field {
 public:
  virtual ~Field() = default;
  virtual mesh::SignConvention convention() const = 0;
  virtual ad::Var sdf(ad::Tape& tape, const Matrix& points) const = 0;
  virtual ad::Var color(ad::Tape& tape, const Matrix& points) const = 0;
};

// Closed-form field, used as ground truth.
class AnalyticField final : public Field {
 public:
  AnalyticField(std::function<double(const Vec3&)> sdf, std::function<Vec3(const Vec3&)> color,
                mesh::SignConvention convention = mesh::SignConvention::negative_inside);
  mesh::SignConvention convention() const override { return convention_; }
  ad::Var sdf(ad::Tape& tape, const Matrix& points) const override;
  ad::Var color(ad::Tape& tape, const Matrix& points) const override;

 private:
  std::function<double(const Vec3&)> sdf_;
  std::function<Vec3(const Vec3&)> color_;
  mesh::SignConvention convention_;
};

// The reconstruction heads over a bound triplane.
class ModelField final : public Field {
 public:
  ModelField(const BoundModel& model, std::array<ad::Var, 3> planes);
  mesh::SignConvention convention() const override { return model_.model().config().convention; }
  ad::Var sdf(ad::Tape& tape, const Matrix& points) const override;
  ad::Var color(ad::Tape& tape, const Matrix& points) const override;

 private:
  const BoundModel& model_;
  std::array<ad::Var, 3> planes_;
};

struct RenderOptions {
  int width = 64;
  int height = 64;
  int samples = 64;         // uniform samples per ray inside the box
  double sharpness = 0.02;  // logistic scale b of the opacity CDF, in box units
  bool normals = true;
  double normal_step = 1e-3;  // central-difference step for SDF gradients
  Vec3 background = Vec3::Ones();
  // Optional subset of pixel indices to render (row-major); empty renders all.
  std::vector<int> pixels;
};

// Differentiable per-pixel outputs, one row per rendered pixel.
struct VolumeRender {
  ad::Var rgb;     // P x 3, composited over the background
  ad::Var mask;    // P x 1, accumulated opacity
  ad::Var depth;   // P x 1, expected camera depth of the visible surface
  ad::Var normal;  // P x 3, world space, unit length (invalid if normals off)
};

VolumeRender render_volume(ad::Tape& tape, const Field& field, const Camera& cam, const RenderOptions& opt);

struct RenderedView {
  Image rgb;     // 3 channels
  Image mask;    // 1 channel
  Image depth;   // 1 channel, camera units, 0 where empty
  Image normal;  // 3 channels, world-space unit vectors, 0 where empty
};

RenderedView to_view(const VolumeRender& r, int width, int height);

// Z-buffered rasterization of a triangle mesh: perspective-correct vertex
// colors, flat face normals, binary coverage mask.
RenderedView rasterize_mesh(const mesh::MeshResult& mesh, const Camera& cam, int width, int height,
                            const Vec3& background = Vec3::Ones());

enum class RenderMode { volume, mesh };

// Renders a frozen model + triplane from each camera. Volume mode ray-marches
// the SDF density; mesh mode rasterizes the extracted surface.
std::vector<RenderedView> render_views(const ReconModel& model, const Triplane& tp,
                                       const std::vector<CameraPose>& cameras, RenderMode mode,
                                       const RenderOptions& opt = {});

}  // namespace style3d::recon
