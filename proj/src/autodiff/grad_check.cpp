// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "promptmil/common/error.hpp"

namespace promptmil {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

namespace {

std::optional<double> probe(Graph& graph, Var root) {
  try {
    const double v = graph.forward(root)[0];
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

}  // namespace

GradCheckReport grad_check(Graph& graph, Var root, double h, double tol) {
  if (!(h >= 1e-7 && h <= 1e-4)) {
    throw ValidationError("grad_check: step " + std::to_string(h) + " outside [1e-7, 1e-4]");
  }
  graph.forward(root);
  const GradientMap analytic = graph.backward(root);

  GradCheckReport report;
  report.tolerance = tol;
  bool clean = true;
  for (std::size_t id : graph.parameter_ids()) {
    if (id > root.id()) continue;
    LeafCheck leaf;
    leaf.name = graph.name(id);
    const Tensor& grad = analytic.at(leaf.name);
    const std::size_t count = graph.value(id).size();
    leaf.coordinates = count;
    for (std::size_t i = 0; i < count; ++i) {
      Tensor& x = graph.leaf_value(id);
      const double saved = x[i];
      x[i] = saved + h;
      const auto plus = probe(graph, root);
      graph.leaf_value(id)[i] = saved - h;
      const auto minus = probe(graph, root);
      graph.leaf_value(id)[i] = saved;
      if (!plus || !minus) {
        leaf.non_finite.push_back(i);
        clean = false;
        continue;
      }
      const double numeric = (*plus - *minus) / (2.0 * h);
      leaf.max_rel_error = std::max(leaf.max_rel_error, relative_error(grad[i], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, leaf.max_rel_error);
    report.leaves.push_back(std::move(leaf));
  }
  graph.forward(root);
  graph.backward(root);
  report.passed = clean && report.max_rel_error <= tol;
  return report;
}

}  // namespace promptmil
