// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/tensor.hpp"

namespace promptmil {

/// Trainable tensors by name. Ordered, so iteration (and therefore Adam
/// updates and digests) is deterministic.
using ParamStore = std::map<std::string, Tensor>;

/// Graph handles for a ParamStore registered as requires-grad leaves.
class BoundParams {
 public:
  BoundParams(Graph& graph, const ParamStore& store);

  /// Throws ValidationError when the name is missing.
  Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.contains(name); }
  Graph& graph() const { return *graph_; }

 private:
  Graph* graph_;
  std::map<std::string, Var> vars_;
};

/// SHA-256 over names, shapes and values of every parameter.
std::string digest(const ParamStore& store);

}  // namespace promptmil
