// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/params.hpp"

namespace promptmil {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

/// One bias-corrected Adam update. Parameters without an entry in `grads`
/// are left untouched (their moments do not decay either). Throws
/// NumericError naming the parameter if a gradient is not finite.
void adam_step(ParamStore& params, const GradientMap& grads, AdamState& state);

}  // namespace promptmil
