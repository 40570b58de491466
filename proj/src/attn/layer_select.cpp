#include "style3d/attention.hpp"
#include "style3d/error.hpp"

#include <fnmatch.h>

#include <algorithm>

namespace style3d::attn {
namespace {

bool is_glob(const std::string& pattern) { return pattern.find_first_of("*?[") != std::string::npos; }

bool matches(const std::string& pattern, const std::string& name) {
  if (!is_glob(pattern)) return pattern == name;
  return fnmatch(pattern.c_str(), name.c_str(), 0) == 0;
}

}  // namespace

std::vector<std::string> select_target_layers(std::span<const std::string> available, const AttnConfig& cfg) {
  if (available.empty()) throw ValidationError("select_target_layers: backbone exposes no attention layers");

  std::vector<std::string> missing;
  for (const std::string& pattern : cfg.target_layers()) {
    const bool found = std::any_of(available.begin(), available.end(),
                                   [&](const std::string& name) { return matches(pattern, name); });
    if (!found) missing.push_back(pattern);
  }
  if (!missing.empty()) {
    std::string msg = "configured fusion layers not found in backbone:";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
  }

  std::vector<std::string> selected;
  for (const std::string& name : available) {
    const bool wanted = std::any_of(cfg.target_layers().begin(), cfg.target_layers().end(),
                                    [&](const std::string& pattern) { return matches(pattern, name); });
    if (wanted) selected.push_back(name);
  }
  return selected;
}

}  // namespace style3d::attn
