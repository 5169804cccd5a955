#pragma once

#include <map>
#include <string>
#include <vector>

#include "wnewton/types.hpp"

namespace wnewton::harness {

/// Flat numeric parameter bag for target construction.
struct ParamMap {
  std::map<std::string, double> values;

  double get(const std::string& key, double fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  bool has(const std::string& key) const { return values.count(key) > 0; }
};

/// Builds a registered target by name. Built-ins: "gauss1d", "gaussNd",
/// "double-well", "bimodal2d", "double-banana", "blr-synthetic".
TargetModel build_target(const std::string& name, const ParamMap& params = {});

std::vector<std::string> registered_targets();

}  // namespace wnewton::harness
