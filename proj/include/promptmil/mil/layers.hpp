// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/tensor.hpp"

namespace promptmil::mil {

struct PatchMatch {
  std::vector<std::size_t> indices;  // best example per patch
  std::vector<double> cosines;       // cosine to that example
  Tensor augmented;                  // n x 2d rows [f ; z_match]
};

/// For each patch the example with the highest cosine (ties go to the lowest
/// index). With top_k > 1 the appended half is the mean of the k best
/// examples; `indices` still reports the best one.
PatchMatch match_patch_examples(const Tensor& bag, const Tensor& examples, std::size_t top_k = 1);

/// Argmax cosine row of `candidates` (ties -> lowest index).
std::size_t best_match(std::span<const double> query, const Tensor& candidates);
/// Indices of the k highest-cosine rows, best first, ties by lower index.
std::vector<std::size_t> top_matches(std::span<const double> query, const Tensor& candidates,
                                     std::size_t k);

/// Query/key/value maps, already transposed to (in x d_w).
struct MessengerWeights {
  Var query_t;
  Var key_t;
  Var value_t;
};

/// softmax(Q K^T / sqrt(d_w)) V with Q, K, V linear in the input rows.
/// Single head; no residual, no positional encoding.
Var messenger_forward(Var features, const MessengerWeights& w);

/// V^T (in x h) and w^T (h x 1).
struct SummaryWeights {
  Var v_t;
  Var w_col;
};

struct SummaryOutput {
  Var pooled;     // 1 x in
  Var attention;  // 1 x n
};

/// a = softmax_j(w^T tanh(V f_j)), pooled = sum_j a_j f_j.
SummaryOutput summary_forward(Var features, const SummaryWeights& w);
/// Arithmetic mean; `attention` is the constant 1/n row.
SummaryOutput mean_pool(Var features);

/// Linear map then row l2-normalization (eps-guarded).
Var align_project(Var rows, Var weight_t);

}  // namespace promptmil::mil
