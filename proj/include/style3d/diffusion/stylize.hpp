#pragma once

// Multi-view stylization: invert content and style through the frozen
// backend, capture attention features, and regenerate the content with fused
// attention at the configured layers.

#include "style3d/attention.hpp"
#include "style3d/diffusion/backend.hpp"
#include "style3d/diffusion/feature_bank.hpp"
#include "style3d/diffusion/view_grid.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace style3d::diffusion {

enum class TrajectorySource { content, style };

// Latents x_0 .. x_T in inversion order with their training timesteps, plus
// the conditioning tokens of the image the trajectory came from.
struct LatentTrajectory {
  std::vector<Matrix> latents;
  std::vector<int> timesteps;
  TrajectorySource source = TrajectorySource::content;
  Matrix conditioning;

  int steps() const { return static_cast<int>(latents.size()) - 1; }
};

// Human-readable description of the input normalization, for run reports.
const char* preprocessing_description();

// Deterministic DDIM inversion of one input image (any size, RGB/RGBA/gray).
// Throws ValidationError for steps < 0.
LatentTrajectory ddpm_invert(const Image& image, const Backend& backend, int steps,
                             TrajectorySource source = TrajectorySource::content);

enum class CaptureRole { style, content };

// Replays the denoising pass from the trajectory's terminal latent with native
// attention and records, at each (target layer, active step): K and V for the
// style role, or the query for the content role.
FeatureBank capture_features(const LatentTrajectory& trajectory, const Backend& backend, const attn::AttnConfig& cfg,
                             CaptureRole role);

// Called with the fused attention weights at every fused (layer, step).
using FusionObserver = std::function<void(const std::string& layer, int step, const Matrix& weights)>;

// Replaces target-layer attention with fuse_attention over the bank and
// defers every other call to native attention.
class FusionProcessor final : public AttentionProcessor {
 public:
  FusionProcessor(const FeatureBank& bank, const attn::AttnConfig& cfg, std::vector<std::string> target_layers,
                  FusionObserver observer = nullptr);

  Matrix process(const AttentionCall& call) override;

 private:
  const FeatureBank& bank_;
  const attn::AttnConfig& cfg_;
  std::vector<std::string> targets_;
  FusionObserver observer_;
  NativeAttention native_;
};

struct GenerateOptions {
  int steps = 65;
  std::uint64_t seed = 42;
  // DDIM stochasticity; 0 gives the deterministic sampler.
  double eta = 0.0;
};

// Runs the denoising loop from x_T over `timesteps` (ascending, timesteps[0]
// clean) and returns x_0.
Matrix denoise(const Backend& backend, const Matrix& x_t, const std::vector<int>& timesteps, const Matrix& conditioning,
               AttentionProcessor& attention, double eta = 0.0, std::uint64_t seed = 0);

// Stylized six-view generation. Validates that the bank covers every
// (target layer, active step) before any compute and names the first gap.
ViewGrid generate_multiview(const Image& content, const FeatureBank& bank, const Backend& backend,
                            const attn::AttnConfig& cfg, const GenerateOptions& options,
                            FusionObserver observer = nullptr);

// The same pipeline with the backbone untouched.
ViewGrid generate_native(const Image& content, const Backend& backend, const GenerateOptions& options);

// Active steps of cfg within 1..steps, ascending.
std::vector<int> active_steps(const attn::AttnConfig& cfg, int steps);

}  // namespace style3d::diffusion
