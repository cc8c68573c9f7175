// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "promptmil/autodiff/graph.hpp"

namespace promptmil {

struct LeafCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  /// Coordinates whose perturbed forward pass was not finite.
  std::vector<std::size_t> non_finite;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - n| / max(1, |a|, |n|)
double relative_error(double analytic, double numeric);

/// Compares the analytic gradient of `root` against central differences
/// (f(x+h) - f(x-h)) / 2h for every coordinate of every requires-grad leaf.
/// Leaf values are restored afterwards. Requires h in [1e-7, 1e-4].
GradCheckReport grad_check(Graph& graph, Var root, double h, double tol);

}  // namespace promptmil
