#include "style3d/diffusion/feature_bank.hpp"

#include "style3d/error.hpp"

namespace style3d::diffusion {

void FeatureBank::put_key_value(const std::string& layer, int timestep, attn::FeatureTensor key,
                                attn::FeatureTensor value) {
  if (key.tokens() != value.tokens()) throw ValidationError("feature bank: key/value token counts differ");
  entries_.insert_or_assign(BankKey{layer, timestep}, KeyValue{std::move(key), std::move(value)});
}

void FeatureBank::put_preserve_query(const std::string& layer, int timestep, attn::FeatureTensor query) {
  preserve_.insert_or_assign(BankKey{layer, timestep}, std::move(query));
}

const KeyValue* FeatureBank::find_key_value(const std::string& layer, int timestep) const {
  const auto it = entries_.find(BankKey{layer, timestep});
  return it == entries_.end() ? nullptr : &it->second;
}

const attn::FeatureTensor* FeatureBank::find_preserve_query(const std::string& layer, int timestep) const {
  const auto it = preserve_.find(BankKey{layer, timestep});
  return it == preserve_.end() ? nullptr : &it->second;
}

FeatureBank FeatureBank::merged_with(const FeatureBank& other) const {
  FeatureBank out = *this;
  for (const auto& [k, kv] : other.entries_) {
    if (!out.entries_.emplace(k, kv).second) {
      throw ValidationError("feature bank merge: duplicate key/value entry for " + k.layer + " step " +
                            std::to_string(k.timestep));
    }
  }
  for (const auto& [k, q] : other.preserve_) {
    if (!out.preserve_.emplace(k, q).second) {
      throw ValidationError("feature bank merge: duplicate preserved query for " + k.layer + " step " +
                            std::to_string(k.timestep));
    }
  }
  return out;
}

std::optional<std::string> FeatureBank::first_missing(std::span<const std::string> layers,
                                                      std::span<const int> steps) const {
  for (const auto& layer : layers) {
    for (int t : steps) {
      if (find_key_value(layer, t) == nullptr) {
        return "style key/value for layer " + layer + " at step " + std::to_string(t);
      }
      if (find_preserve_query(layer, t) == nullptr) {
        return "preserved content query for layer " + layer + " at step " + std::to_string(t);
      }
    }
  }
  return std::nullopt;
}

}  // namespace style3d::diffusion
