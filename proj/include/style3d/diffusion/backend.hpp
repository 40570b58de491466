#pragma once

#include "style3d/diffusion/scheduler.hpp"
#include "style3d/image.hpp"
#include "style3d/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace style3d::diffusion {

enum class BackendKind { toy, pretrained };

const char* to_string(BackendKind kind);

// One attention evaluation inside the noise predictor. Query, key and value
// are already projected; the processor returns the attention output that the
// layer then projects back into the residual stream.
struct AttentionCall {
  const std::string& layer;
  int step;  // denoising step index, 1..steps
  bool self_attention;
  const Matrix& query;
  const Matrix& key;
  const Matrix& value;
};

class AttentionProcessor {
 public:
  virtual ~AttentionProcessor() = default;
  virtual Matrix process(const AttentionCall& call) = 0;
};

// softmax(q k^T / sqrt(d)) v, i.e. the backbone left untouched.
class NativeAttention final : public AttentionProcessor {
 public:
  Matrix process(const AttentionCall& call) override;
};

// A frozen multi-view diffusion model. Images in, latents as [tokens x
// channels] matrices, noise prediction with pluggable attention.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;
  virtual std::string weight_source() const = 0;
  // Attention layers in execution order.
  virtual const std::vector<std::string>& attention_layers() const = 0;
  virtual const DdimScheduler& scheduler() const = 0;

  // Side length of one generated view in pixels.
  virtual int view_size() const = 0;

  // The 3x2 arrangement of a single preprocessed input used as the starting
  // point for inversion.
  virtual Image reference_tile(const Image& view) const = 0;
  virtual Matrix encode(const Image& tile) const = 0;
  virtual Image decode(const Matrix& latent) const = 0;
  // Conditioning tokens from one preprocessed view.
  virtual Matrix condition(const Image& view) const = 0;

  virtual Matrix predict_noise(const Matrix& latent, int timestep, int step, const Matrix& conditioning,
                               AttentionProcessor& attention) const = 0;
};

struct ToyBackendOptions {
  int view_size = 32;
  int latent_factor = 8;
  int latent_channels = 4;
  int hidden = 16;
  double output_scale = 0.1;
  std::uint64_t weight_seed = 7;
  // Zeroes the output projection, making the predicted noise identically 0.
  bool zero_noise_prediction = false;
  std::vector<std::string> layers;  // empty: default_toy_layers()
};

// down, mid and the three up_blocks.3 attention blocks, attn1 + attn2 each.
const std::vector<std::string>& default_toy_layers();

std::shared_ptr<const Backend> make_toy_backend(const ToyBackendOptions& options = {});

// Loads a checkpoint written by save_backend_weights(). Throws BackendError
// naming the source when the file is missing or malformed, or when any of the
// default fusion layers is absent from its layer registry.
std::shared_ptr<const Backend> load_pretrained_backend(const std::filesystem::path& weights);

// Persists a backend's weights in the checkpoint container.
void save_backend_weights(const Backend& backend, const std::filesystem::path& path);

// Pretrained weight lookup: explicit path if given, else
// $STYLE3D_CACHE/mv_backend.s3d, else ~/.cache/style3d/mv_backend.s3d.
std::filesystem::path resolve_weight_path(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace style3d::diffusion
