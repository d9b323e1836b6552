#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mpcc/model.hpp"

namespace mpcc {

/// Built-in test problem with its known solution.
struct RegistryEntry {
  std::string name;
  /// Source in the model file format.
  std::string model;
  MpccProblem problem;
  /// Plain NLP (no pairs); solved with SQP.
  bool nlp = false;
  /// Solution with its multipliers.
  PrimalDualPoint reference;
  /// Canonical initial points.
  std::vector<Vec> starts;
};

std::vector<std::string> registry_names();
bool registry_has(std::string_view name);
/// Throws std::invalid_argument for an unknown name.
RegistryEntry registry_entry(std::string_view name);

}  // namespace mpcc
