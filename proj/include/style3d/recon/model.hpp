#pragma once

// Feed-forward reconstruction: patch tokens from each posed view, modulated by
// the camera through adaptive layer norm, are read out into a triplane by
// learnable plane queries; small MLP heads turn triplane samples into SDF,
// color, FlexiCubes deformation and weights.

#include "style3d/autodiff.hpp"
#include "style3d/mesh/flexicubes.hpp"
#include "style3d/recon/supervision.hpp"
#include "style3d/recon/triplane.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace style3d::recon {

struct ReconConfig {
  int patch_size = 8;
  int token_dim = 32;
  int triplane_resolution = 16;
  int triplane_channels = 8;
  int hidden = 32;
  int grid_resolution = 32;  // FlexiCubes cells per axis
  double init_radius = 0.45;
  mesh::SignConvention convention = mesh::SignConvention::positive_inside;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FieldSample {
  double sdf = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 deformation = Vec3::Zero();
  mesh::CellWeights weights;
};

class ReconModel {
 public:
  using Parameters = std::vector<std::pair<std::string, Matrix>>;

  explicit ReconModel(ReconConfig config = {});

  const ReconConfig& config() const { return config_; }
  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }
  const Matrix& param(const std::string& name) const;
  Matrix& param(const std::string& name);
  std::size_t parameter_count() const;

  double grid_cell() const { return 2.0 / config_.grid_resolution; }

  void save(const std::filesystem::path& path) const;
  // Throws BackendError when the file is unreadable or does not match a
  // reconstruction checkpoint.
  static ReconModel load(const std::filesystem::path& path);

 private:
  ReconConfig config_;
  Parameters params_;
};

// Parameters placed on a tape, as leaves when trainable, else constants.
class BoundModel {
 public:
  BoundModel(const ReconModel& model, ad::Tape& tape, bool trainable);

  const ReconModel& model() const { return model_; }
  ad::Tape& tape() const { return tape_; }
  const ad::Var& operator[](const std::string& name) const;
  const std::vector<ad::Var>& vars() const { return vars_; }

 private:
  const ReconModel& model_;
  ad::Tape& tape_;
  std::vector<ad::Var> vars_;
};

struct EncodeOptions {
  bool modulate = true;  // false skips the pose modulation entirely
};

// N * (H/p) * (W/p) tokens of width token_dim, view-major. Throws
// ValidationError when the resolution is not divisible by the patch size.
ad::Var encode_views(const BoundModel& m, const PosedViewBatch& batch, const EncodeOptions& opt = {});
Matrix encode_views(const ReconModel& model, const PosedViewBatch& batch, const EncodeOptions& opt = {});

std::array<ad::Var, 3> decode_triplane(const BoundModel& m, const ad::Var& tokens);
Triplane decode_triplane(const ReconModel& model, const Matrix& tokens);

enum HeadMask : unsigned { kSdfHead = 1u, kColorHead = 2u, kDeformationHead = 4u, kWeightHead = 8u, kAllHeads = 15u };

struct FieldOutputs {
  ad::Var sdf;          // N x 1 in the configured sign convention
  ad::Var color;        // N x 3 in [0, 1]
  ad::Var deformation;  // N x 3, each component within half a grid cell
  ad::Var weights;      // N x 21, in (0.01, 1.99), 1 is neutral
};

FieldOutputs query_points(const BoundModel& m, const std::array<ad::Var, 3>& planes, const Matrix& points,
                          unsigned heads = kAllHeads);

FieldSample query_field(const ReconModel& model, const Triplane& tp, const Vec3& xyz);

// Mean over `points` of |deformation / cell|^2 plus mean (w - 1)^2 over the
// weight head at `cell_centers`; the form flexi_regularizer uses.
ad::Var regularizer_term(const BoundModel& m, const std::array<ad::Var, 3>& planes, const Matrix& points,
                         const Matrix& cell_centers);

// Vertex and cell-center lattices of an n^3 grid over the box.
Matrix lattice_vertices(int n);
Matrix lattice_cell_centers(int n);

// Field evaluated on the FlexiCubes grid.
mesh::SdfGrid build_sdf_grid(const ReconModel& model, const Triplane& tp);
// extract_mesh over build_sdf_grid with vertex colors from the color head.
mesh::MeshResult extract_colored_mesh(const ReconModel& model, const Triplane& tp);

}  // namespace style3d::recon
