// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "promptmil/autodiff/graph.hpp"

namespace promptmil::losses {

/// Rows further than this from unit norm are rejected by ac_loss.
inline constexpr double kUnitNormTolerance = 1e-6;

/// Alignment contrastive loss: mean over rows b of
///   -log softmax_c(cos(F_b, T_c) / tau)[y_b].
/// `log_tau` is a 1x1 node. Rows of both inputs must be unit-norm.
/// With `symmetric` the text-to-image direction is added and the two are
/// averaged; each row's positive is then the text row of its own label.
Var ac_loss(Var features, Var class_features, std::span<const std::size_t> labels, Var log_tau,
            bool symmetric = false);

/// Softmax over cos(F, T_c) / tau. Inputs need not be normalized.
std::vector<double> predict_probs(std::span<const double> feature, const Tensor& class_features, double tau);

}  // namespace promptmil::losses
