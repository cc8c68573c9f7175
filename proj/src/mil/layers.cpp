// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/mil/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "promptmil/common/error.hpp"

namespace promptmil::mil {

std::vector<std::size_t> top_matches(std::span<const double> query, const Tensor& candidates,
                                     std::size_t k) {
  if (candidates.rows() == 0) throw ValidationError("matching: no candidates");
  if (candidates.cols() != query.size()) {
    throw ShapeError("matching: query width " + std::to_string(query.size()) + " vs candidates " +
                     candidates.shape_string());
  }
  std::vector<double> cos(candidates.rows());
  for (std::size_t r = 0; r < candidates.rows(); ++r) cos[r] = cosine(query, candidates.row_span(r));
  std::vector<std::size_t> order(candidates.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return cos[a] > cos[b] || (cos[a] == cos[b] && a < b); });
  order.resize(k);
  return order;
}

std::size_t best_match(std::span<const double> query, const Tensor& candidates) {
  return top_matches(query, candidates, 1).front();
}

PatchMatch match_patch_examples(const Tensor& bag, const Tensor& examples, std::size_t top_k) {
  if (examples.rows() == 0) throw ValidationError("match_patch_examples: example bank is empty");
  if (bag.cols() != examples.cols()) {
    throw ShapeError("match_patch_examples: bag " + bag.shape_string() + " vs bank " + examples.shape_string());
  }
  if (top_k == 0) throw ValidationError("match_patch_examples: top_k must be >= 1");
  const std::size_t n = bag.rows();
  const std::size_t d = bag.cols();
  PatchMatch out;
  out.augmented = Tensor(n, 2 * d);
  out.indices.reserve(n);
  out.cosines.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto f = bag.row_span(j);
    const auto best = top_matches(f, examples, top_k);
    out.indices.push_back(best.front());
    out.cosines.push_back(cosine(f, examples.row_span(best.front())));
    auto dst = out.augmented.row_span(j);
    std::copy(f.begin(), f.end(), dst.begin());
    const double w = 1.0 / static_cast<double>(best.size());
    for (std::size_t idx : best) {
      const auto z = examples.row_span(idx);
      for (std::size_t c = 0; c < d; ++c) dst[d + c] += w * z[c];
    }
  }
  return out;
}

Var messenger_forward(Var features, const MessengerWeights& w) {
  const Var q = ad::matmul(features, w.query_t);
  const Var k = ad::matmul(features, w.key_t);
  const Var v = ad::matmul(features, w.value_t);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt);
  return ad::matmul(ad::row_softmax(scores), v);
}

SummaryOutput summary_forward(Var features, const SummaryWeights& w) {
  const Var hidden = ad::tanh(ad::matmul(features, w.v_t));  // n x h
  const Var logits = ad::transpose(ad::matmul(hidden, w.w_col));  // 1 x n
  const Var attention = ad::row_softmax(logits);
  return {ad::matmul(attention, features), attention};
}

SummaryOutput mean_pool(Var features) {
  const std::size_t n = features.rows();
  Graph& g = *features.graph();
  return {ad::mean_rows(features), g.constant(Tensor(1, n, 1.0 / static_cast<double>(n)))};
}

Var align_project(Var rows, Var weight_t) { return ad::l2_normalize_rows(ad::matmul(rows, weight_t)); }

}  // namespace promptmil::mil
