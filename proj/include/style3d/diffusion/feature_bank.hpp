#pragma once

#include "style3d/attention.hpp"

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace style3d::diffusion {

struct BankKey {
  std::string layer;
  int timestep = 0;

  auto operator<=>(const BankKey&) const = default;
};

struct KeyValue {
  attn::FeatureTensor key;
  attn::FeatureTensor value;
};

// Attention features captured along an inversion trajectory: style keys and
// values, and the preserved content queries. Immutable once built; safe to
// share across threads.
class FeatureBank {
 public:
  void put_key_value(const std::string& layer, int timestep, attn::FeatureTensor key, attn::FeatureTensor value);
  void put_preserve_query(const std::string& layer, int timestep, attn::FeatureTensor query);

  const KeyValue* find_key_value(const std::string& layer, int timestep) const;
  const attn::FeatureTensor* find_preserve_query(const std::string& layer, int timestep) const;

  const std::map<BankKey, KeyValue>& entries() const { return entries_; }
  const std::map<BankKey, attn::FeatureTensor>& preserve_queries() const { return preserve_; }
  bool empty() const { return entries_.empty() && preserve_.empty(); }

  // Union of two banks (typically style K/V + content preserve queries).
  // Overlapping keys are an error.
  FeatureBank merged_with(const FeatureBank& other) const;

  // First (layer, step) among layers x steps lacking K/V or a preserved
  // query, described for an error message. Layers are checked in the given
  // order, steps ascending.
  std::optional<std::string> first_missing(std::span<const std::string> layers, std::span<const int> steps) const;

 private:
  std::map<BankKey, KeyValue> entries_;
  std::map<BankKey, attn::FeatureTensor> preserve_;
};

}  // namespace style3d::diffusion
