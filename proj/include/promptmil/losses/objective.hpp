// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/mil/example_bank.hpp"
#include "promptmil/mil/model.hpp"
#include "promptmil/prompts/prompts.hpp"

namespace promptmil::losses {

struct LossConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double tau0 = 0.07;
  bool symmetric = false;
  double kgcoop_mu = 1.0;

  void validate() const;
};

/// Per-step values of each term (zero when a term is off).
struct LossBreakdown {
  double total = 0.0;
  double text = 0.0;   // L_t, or the cross-entropy of a linear head
  double slide = 0.0;  // L_s
  double patch = 0.0;  // L_p
  double knowledge = 0.0;  // KgCoOp penalty, already scaled by mu
};

struct Batch {
  std::vector<const Tensor*> bags;
  std::vector<std::size_t> labels;
};

struct Objective {
  Var total;
  LossBreakdown parts;
};

/// Builds L_t + lambda1 L_s + lambda2 L_p (+ mu * penalty for KgCoOp) on one
/// graph. Terms with a zero weight are not added at all, so a reduced model
/// computes exactly the same floating-point value as the baseline it reduces
/// to. `text` may be null for linear-head methods.
Objective build_objective(const BoundParams& params, const mil::ModelSpec& spec, const mil::ExampleBank& bank,
                          const prompts::TextBackend* text, const Batch& batch, const LossConfig& cfg);

}  // namespace promptmil::losses
