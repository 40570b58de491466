#pragma once

// MultiFusion attention: content queries (blended with a preserved content
// query) attend over style keys and values with a temperature factor lambda.
//
//   out = softmax(lambda * (beta_c * Q_c + beta_p * Q_c^p) * K_s^T / sqrt(d)) * V_s
//
// Everything here is a pure function of its inputs.

#include "style3d/tensor.hpp"

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace style3d::attn {

enum class FeatureKind { query, query_preserve, key, value };

const char* to_string(FeatureKind kind);

// A [tokens x dim] feature block tagged with where it was captured.
class FeatureTensor {
 public:
  // Throws ValidationError on empty or non-finite data.
  explicit FeatureTensor(Matrix data, std::string layer_id = {}, int timestep = 0,
                         FeatureKind kind = FeatureKind::query);

  const Matrix& data() const { return data_; }
  const std::string& layer_id() const { return layer_id_; }
  int timestep() const { return timestep_; }
  FeatureKind kind() const { return kind_; }
  Eigen::Index tokens() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }

 private:
  Matrix data_;
  std::string layer_id_;
  int timestep_;
  FeatureKind kind_;
};

// Blend weights for the live content query and the preserved query.
struct Beta {
  double content = 0.4;   // beta_c
  double preserve = 0.6;  // beta_p

  friend bool operator==(const Beta&, const Beta&) = default;
};

// Throws ValidationError unless both weights are >= 0 and sum to 1.
void validate_beta(const Beta& beta);

// Closed interval of denoising step indices on which fusion is active.
struct TimestepRange {
  int first = 0;
  int last = std::numeric_limits<int>::max();

  bool contains(int t) const { return t >= first && t <= last; }
  friend bool operator==(const TimestepRange&, const TimestepRange&) = default;
};

// The five up-sampling attention layers fusion is applied to by default.
const std::vector<std::string>& default_fusion_layers();

class AttnConfig {
 public:
  using LambdaSchedule = std::function<double(int timestep)>;

  // Defaults: lambda 1.5, beta (0.4, 0.6), the default fusion layers, every step.
  AttnConfig();
  AttnConfig(double lambda, Beta beta, std::vector<std::string> target_layers, TimestepRange active = {});

  double lambda() const { return lambda_; }
  const Beta& beta() const { return beta_; }
  const std::vector<std::string>& target_layers() const { return target_layers_; }
  const TimestepRange& active_timesteps() const { return active_; }

  // Lambda used at a given step. Constant unless a schedule was installed; a
  // schedule returning a non-positive value is rejected when queried.
  double lambda_at(int timestep) const;
  void set_lambda_schedule(LambdaSchedule schedule) { schedule_ = std::move(schedule); }
  bool has_lambda_schedule() const { return static_cast<bool>(schedule_); }

  // When set, the preserved query captured at the first active step is reused
  // for every step instead of one capture per step.
  bool freeze_preserve_query() const { return freeze_preserve_query_; }
  void set_freeze_preserve_query(bool freeze) { freeze_preserve_query_ = freeze; }

 private:
  double lambda_;
  Beta beta_;
  std::vector<std::string> target_layers_;
  TimestepRange active_;
  LambdaSchedule schedule_;
  bool freeze_preserve_query_ = false;
};

FeatureTensor blend_queries(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const Beta& beta);

// Row-wise softmax of scale * q * k^T with max subtraction. Rows sum to 1.
Matrix attention_weights(const Matrix& q, const Matrix& k, double scale);

// softmax(q k^T / sqrt(d)) v.
FeatureTensor standard_attention(const FeatureTensor& q, const FeatureTensor& k, const FeatureTensor& v);

FeatureTensor fuse_attention(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const FeatureTensor& k_s,
                             const FeatureTensor& v_s, const AttnConfig& cfg, int timestep);

// Attention weights fuse_attention would apply (before multiplying by V_s).
Matrix fused_attention_weights(const FeatureTensor& q_c, const FeatureTensor& q_c_p, const FeatureTensor& k_s,
                               const AttnConfig& cfg, int timestep);

// Shannon entropy (nats) of each row of a row-stochastic matrix.
Eigen::VectorXd row_entropy(const Matrix& weights);

// Configured targets resolved against the backbone's layer list, in backbone
// order. Entries may be exact names or globs ('*', '?', '[...]'). Any entry
// matching nothing is an error naming every such entry.
std::vector<std::string> select_target_layers(std::span<const std::string> available, const AttnConfig& cfg);

}  // namespace style3d::attn
