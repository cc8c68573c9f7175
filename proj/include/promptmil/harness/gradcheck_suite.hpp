// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptmil/autodiff/grad_check.hpp"

namespace promptmil::harness {

struct GradCheckTrial {
  std::string description;
  GradCheckReport report;
};

/// Finite-difference checks of the full training objective on small random
/// problems: d in {8, 16}, bag sizes in {3, 7}, U in {2, 3}, cycling through
/// every method, both text backends and the ablation flags so each trainable
/// group is covered.
std::vector<GradCheckTrial> run_gradcheck_suite(std::size_t trials, double tol, double h = 1e-5,
                                                std::uint64_t seed = 0);

}  // namespace promptmil::harness
