#include "style3d/attention.hpp"

#include "style3d/error.hpp"

#include <cmath>
#include <sstream>

namespace style3d::attn {
namespace {

void require_same_shape(const FeatureTensor& a, const FeatureTensor& b, const char* what) {
  if (a.tokens() != b.tokens() || a.dim() != b.dim()) {
    throw ValidationError(std::string(what) + ": shape mismatch " + shape_string(a.data()) + " vs " +
                          shape_string(b.data()));
  }
}

void require_attention_shapes(const FeatureTensor& q, const FeatureTensor& k, const FeatureTensor& v) {
  if (q.dim() != k.dim()) {
    throw ValidationError("attention: query dim " + std::to_string(q.dim()) + " != key dim " +
                          std::to_string(k.dim()));
  }
  if (k.tokens() != v.tokens()) {
    throw ValidationError("attention: key tokens " + std::to_string(k.tokens()) + " != value tokens " +
                          std::to_string(v.tokens()));
  }
}

Matrix blend(const Matrix& q_c, const Matrix& q_c_p, const Beta& beta) {
  // Endpoints return the selected input untouched so that disabling one side
  // is exact, including signed zeros.
  if (beta.preserve == 0.0) return q_c;
  if (beta.content == 0.0) return q_c_p;
  return beta.content * q_c + beta.preserve * q_c_p;
}

}  // namespace

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::query: return "query";
    case FeatureKind::query_preserve: return "query_preserve";
    case FeatureKind::key: return "key";
    case FeatureKind::value: return "value";
  }
  return "unknown";
}

FeatureTensor::FeatureTensor(Matrix data, std::string layer_id, int timestep, FeatureKind kind)
    : data_(std::move(data)), layer_id_(std::move(layer_id)), timestep_(timestep), kind_(kind) {
  if (data_.rows() <= 0 || data_.cols() <= 0) {
    throw ValidationError("feature tensor must have tokens > 0 and dim > 0, got " + shape_string(data_));
  }
  if (timestep_ < 0) throw ValidationError("feature tensor timestep must be >= 0");
  if (!data_.allFinite()) {
    throw ValidationError("feature tensor '" + layer_id_ + "' (" + to_string(kind_) + ") contains non-finite values");
  }
}

void validate_beta(const Beta& beta) {
  if (!(beta.content >= 0.0) || !(beta.preserve >= 0.0)) {
    throw ValidationError("beta weights must be non-negative");
  }
  if (std::abs(beta.content + beta.preserve - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "beta_c + beta_p must equal 1 (got " << beta.content << " + " << beta.preserve << ")";
    throw ValidationError(msg.str());
  }
}

const std::vector<std::string>& default_fusion_layers() {
  static const std::vector<std::string> layers = {
      "up_blocks.3.attentions.0.transformer_blocks.0.attn2",
      "up_blocks.3.attentions.1.transformer_blocks.0.attn1",
      "up_blocks.3.attentions.1.transformer_blocks.0.attn2",
      "up_blocks.3.attentions.2.transformer_blocks.0.attn1",
      "up_blocks.3.attentions.2.transformer_blocks.0.attn2",
  };
  return layers;
}

AttnConfig::AttnConfig() : AttnConfig(1.5, Beta{0.4, 0.6}, default_fusion_layers()) {}

AttnConfig::AttnConfig(double lambda, Beta beta, std::vector<std::string> target_layers, TimestepRange active)
    : lambda_(lambda), beta_(beta), target_layers_(std::move(target_layers)), active_(active) {
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) throw ValidationError("lambda must be a finite value > 0");
  validate_beta(beta_);
  if (active_.first > active_.last) throw ValidationError("active timestep range is empty");
}

double AttnConfig::lambda_at(int timestep) const {
  if (!schedule_) return lambda_;
  const double l = schedule_(timestep);
  if (!(l > 0.0) || !std::isfinite(l)) {
    throw ValidationError("lambda schedule produced a non-positive value at step " + std::to_string(timestep));
  }
  return l;
}

FeatureTensor blend_queries(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const Beta& beta) {
  require_same_shape(q_c, q_c_p, "blend_queries");
  validate_beta(beta);
  return FeatureTensor(blend(q_c.data(), q_c_p.data(), beta), q_c.layer_id(), q_c.timestep(), FeatureKind::query);
}

Matrix attention_weights(const Matrix& q, const Matrix& k, double scale) {
  Matrix logits = (q * k.transpose()) * scale;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp().matrix();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

FeatureTensor standard_attention(const FeatureTensor& q, const FeatureTensor& k, const FeatureTensor& v) {
  require_attention_shapes(q, k, v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.dim()));
  return FeatureTensor(attention_weights(q.data(), k.data(), scale) * v.data(), q.layer_id(), q.timestep(),
                       FeatureKind::value);
}

Matrix fused_attention_weights(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const FeatureTensor& k_s,
                               const AttnConfig& cfg, int timestep) {
  require_same_shape(q_c, q_c_p, "fuse_attention");
  if (q_c.dim() != k_s.dim()) {
    throw ValidationError("fuse_attention: query dim " + std::to_string(q_c.dim()) + " != key dim " +
                          std::to_string(k_s.dim()));
  }
  if (!cfg.active_timesteps().contains(timestep)) {
    throw ValidationError("fuse_attention called at inactive timestep " + std::to_string(timestep));
  }
  const double scale = cfg.lambda_at(timestep) / std::sqrt(static_cast<double>(q_c.dim()));
  return attention_weights(blend(q_c.data(), q_c_p.data(), cfg.beta()), k_s.data(), scale);
}

FeatureTensor fuse_attention(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const FeatureTensor& k_s,
                             const FeatureTensor& v_s, const AttnConfig& cfg, int timestep) {
  require_attention_shapes(q_c, k_s, v_s);
  const Matrix w = fused_attention_weights(q_c, q_c_p, k_s, cfg, timestep);
  return FeatureTensor(w * v_s.data(), q_c.layer_id(), timestep, FeatureKind::value);
}

Eigen::VectorXd row_entropy(const Matrix& weights) {
  Eigen::VectorXd h(weights.rows());
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      const double p = weights(r, c);
      if (p > 0.0) acc -= p * std::log(p);
    }
    h(r) = acc;
  }
  return h;
}

}  // namespace style3d::attn
