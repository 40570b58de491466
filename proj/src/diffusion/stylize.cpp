#include "style3d/diffusion/stylize.hpp"

#include "style3d/error.hpp"
#include "style3d/rng.hpp"

#include <algorithm>

namespace style3d::diffusion {
namespace {

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

// Records features at target layers while computing native attention.
class CaptureProcessor final : public AttentionProcessor {
 public:
  CaptureProcessor(FeatureBank& bank, CaptureRole role, const attn::AttnConfig& cfg, std::vector<std::string> targets)
      : bank_(bank), role_(role), cfg_(cfg), targets_(std::move(targets)) {}

  Matrix process(const AttentionCall& call) override {
    if (cfg_.active_timesteps().contains(call.step) && contains(targets_, call.layer)) {
      if (role_ == CaptureRole::style) {
        bank_.put_key_value(call.layer, call.step,
                            attn::FeatureTensor(call.key, call.layer, call.step, attn::FeatureKind::key),
                            attn::FeatureTensor(call.value, call.layer, call.step, attn::FeatureKind::value));
      } else {
        queries_.emplace_back(call.layer, call.step, call.query);
      }
    }
    return native_.process(call);
  }

  // Content captures are written once the pass finishes so a frozen query can
  // be taken from the first active step.
  void flush() {
    for (const auto& [layer, step, q] : queries_) {
      const Matrix* source = &q;
      if (cfg_.freeze_preserve_query()) {
        int first = step;
        for (const auto& [l2, s2, q2] : queries_) {
          if (l2 == layer && s2 < first) {
            first = s2;
            source = &q2;
          }
        }
      }
      bank_.put_preserve_query(layer, step,
                               attn::FeatureTensor(*source, layer, step, attn::FeatureKind::query_preserve));
    }
    queries_.clear();
  }

 private:
  FeatureBank& bank_;
  CaptureRole role_;
  const attn::AttnConfig& cfg_;
  std::vector<std::string> targets_;
  std::vector<std::tuple<std::string, int, Matrix>> queries_;
  NativeAttention native_;
};

struct PreparedInput {
  Image view;
  Matrix latent;
  Matrix conditioning;
};

PreparedInput prepare(const Image& image, const Backend& backend) {
  PreparedInput in;
  in.view = preprocess_for_model(image, backend.view_size());
  in.latent = backend.encode(backend.reference_tile(in.view));
  in.conditioning = backend.condition(in.view);
  return in;
}

}  // namespace

const char* preprocessing_description() {
  return "alpha composited over white; padded to square with white; area-resampled to the backend view size";
}

std::vector<int> active_steps(const attn::AttnConfig& cfg, int steps) {
  std::vector<int> out;
  for (int k = 1; k <= steps; ++k)
    if (cfg.active_timesteps().contains(k)) out.push_back(k);
  return out;
}

LatentTrajectory ddpm_invert(const Image& image, const Backend& backend, int steps, TrajectorySource source) {
  if (steps < 0) throw ValidationError("inversion steps must be >= 0, got " + std::to_string(steps));
  const PreparedInput in = prepare(image, backend);
  LatentTrajectory traj;
  traj.source = source;
  traj.conditioning = in.conditioning;
  traj.timesteps = backend.scheduler().timesteps(steps);
  traj.latents.reserve(static_cast<std::size_t>(steps) + 1);
  traj.latents.push_back(in.latent);
  NativeAttention native;
  for (int k = 1; k <= steps; ++k) {
    const Matrix& x = traj.latents.back();
    const Matrix eps = backend.predict_noise(x, traj.timesteps[k], k, traj.conditioning, native);
    traj.latents.push_back(backend.scheduler().step(x, eps, traj.timesteps[k - 1], traj.timesteps[k]));
  }
  return traj;
}

FeatureBank capture_features(const LatentTrajectory& trajectory, const Backend& backend, const attn::AttnConfig& cfg,
                             CaptureRole role) {
  if (trajectory.latents.empty() || trajectory.latents.size() != trajectory.timesteps.size()) {
    throw ValidationError("capture_features: malformed trajectory");
  }
  FeatureBank bank;
  if (cfg.target_layers().empty()) return bank;
  std::vector<std::string> targets = attn::select_target_layers(backend.attention_layers(), cfg);
  CaptureProcessor capture(bank, role, cfg, std::move(targets));
  denoise(backend, trajectory.latents.back(), trajectory.timesteps, trajectory.conditioning, capture);
  capture.flush();
  return bank;
}

FusionProcessor::FusionProcessor(const FeatureBank& bank, const attn::AttnConfig& cfg,
                                 std::vector<std::string> target_layers, FusionObserver observer)
    : bank_(bank), cfg_(cfg), targets_(std::move(target_layers)), observer_(std::move(observer)) {}

Matrix FusionProcessor::process(const AttentionCall& call) {
  if (!cfg_.active_timesteps().contains(call.step) || !contains(targets_, call.layer)) {
    return native_.process(call);
  }
  const KeyValue* kv = bank_.find_key_value(call.layer, call.step);
  const attn::FeatureTensor* preserved = bank_.find_preserve_query(call.layer, call.step);
  if (kv == nullptr || preserved == nullptr) {
    throw ValidationError("feature bank has no entry for layer " + call.layer + " at step " +
                          std::to_string(call.step));
  }
  const attn::FeatureTensor q(call.query, call.layer, call.step, attn::FeatureKind::query);
  if (observer_) {
    observer_(call.layer, call.step, attn::fused_attention_weights(q, *preserved, kv->key, cfg_, call.step));
  }
  return attn::fuse_attention(q, *preserved, kv->key, kv->value, cfg_, call.step).data();
}

Matrix denoise(const Backend& backend, const Matrix& x_t, const std::vector<int>& timesteps,
               const Matrix& conditioning, AttentionProcessor& attention, double eta, std::uint64_t seed) {
  if (timesteps.empty()) throw ValidationError("denoise: empty timestep list");
  Rng rng(seed);
  Matrix x = x_t;
  const DdimScheduler& sched = backend.scheduler();
  for (int k = static_cast<int>(timesteps.size()) - 1; k >= 1; --k) {
    const Matrix eps = backend.predict_noise(x, timesteps[k], k, conditioning, attention);
    if (eta == 0.0) {
      x = sched.step(x, eps, timesteps[k], timesteps[k - 1]);
    } else {
      const Matrix noise = rng.normal_matrix(x.rows(), x.cols(), 1.0);
      x = sched.step_eta(x, eps, timesteps[k], timesteps[k - 1], eta, noise);
    }
  }
  return x;
}

ViewGrid generate_multiview(const Image& content, const FeatureBank& bank, const Backend& backend,
                            const attn::AttnConfig& cfg, const GenerateOptions& options, FusionObserver observer) {
  if (options.steps < 1) throw ValidationError("generation needs at least one step");
  std::vector<std::string> targets =
      cfg.target_layers().empty() ? std::vector<std::string>{}
                                  : attn::select_target_layers(backend.attention_layers(), cfg);
  const std::vector<int> steps = active_steps(cfg, options.steps);
  if (auto missing = bank.first_missing(targets, steps)) {
    throw ValidationError("incomplete feature bank: missing " + *missing);
  }
  const LatentTrajectory traj = ddpm_invert(content, backend, options.steps, TrajectorySource::content);
  FusionProcessor fusion(bank, cfg, std::move(targets), std::move(observer));
  const Matrix x0 = denoise(backend, traj.latents.back(), traj.timesteps, traj.conditioning, fusion, options.eta,
                            options.seed);
  return make_view_grid(backend.decode(x0), options.seed);
}

ViewGrid generate_native(const Image& content, const Backend& backend, const GenerateOptions& options) {
  if (options.steps < 1) throw ValidationError("generation needs at least one step");
  const LatentTrajectory traj = ddpm_invert(content, backend, options.steps, TrajectorySource::content);
  NativeAttention native;
  const Matrix x0 = denoise(backend, traj.latents.back(), traj.timesteps, traj.conditioning, native, options.eta,
                            options.seed);
  return make_view_grid(backend.decode(x0), options.seed);
}

}  // namespace style3d::diffusion
