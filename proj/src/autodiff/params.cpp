// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/autodiff/params.hpp"

#include "promptmil/common/digest.hpp"
#include "promptmil/common/error.hpp"

namespace promptmil {

BoundParams::BoundParams(Graph& graph, const ParamStore& store) : graph_(&graph) {
  for (const auto& [name, value] : store) {
    if (value.empty()) continue;
    vars_.emplace(name, graph.parameter(name, value));
  }
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ValidationError("parameter '" + name + "' is not bound");
  return it->second;
}

std::string digest(const ParamStore& store) {
  Sha256 sha;
  for (const auto& [name, value] : store) {
    sha.update(name);
    sha.update_u64(value.rows());
    sha.update_u64(value.cols());
    sha.update(value.data());
  }
  return sha.hex();
}

}  // namespace promptmil
