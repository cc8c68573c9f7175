// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "promptmil/autodiff/tensor.hpp"

namespace promptmil::losses {

struct SurvivalRecord {
  double time = 0.0;
  bool event = false;
};

/// Mann-Whitney AUC with midranks, so tied scores count 1/2. Labels are 0/1;
/// both classes must be present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean of one-vs-rest AUCs over the classes present in `labels`.
/// `probs` is n x U; needs at least two classes present.
double macro_auc_ovr(const Tensor& probs, std::span<const std::size_t> labels);

/// Harrell's C. A pair (a, b) is comparable when time_a < time_b and a had
/// an event; it is concordant when risk_a > risk_b and counts 1/2 on a risk
/// tie. O(n log n). Throws when no pair is comparable.
double c_index(std::span<const double> risks, std::span<const SurvivalRecord> records);

}  // namespace promptmil::losses
