// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/losses/ac_loss.hpp"

#include <algorithm>
#include <cmath>

#include "promptmil/common/error.hpp"

namespace promptmil::losses {

namespace {

void require_unit_rows(const Tensor& t, const char* what) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double n = norm(t.row_span(r));
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      throw ValidationError(std::string("ac_loss: ") + what + " row " + std::to_string(r) + " has norm " +
                            std::to_string(n));
    }
  }
}

}  // namespace

Var ac_loss(Var features, Var class_features, std::span<const std::size_t> labels, Var log_tau, bool symmetric) {
  if (features.cols() != class_features.cols()) {
    throw ShapeError("ac_loss: features " + features.value().shape_string() + " vs class features " +
                     class_features.value().shape_string());
  }
  if (labels.size() != features.rows()) throw ShapeError("ac_loss: label count does not match rows");
  if (log_tau.rows() != 1 || log_tau.cols() != 1) throw ShapeError("ac_loss: log_tau must be 1x1");
  const std::size_t num_classes = class_features.rows();
  for (std::size_t y : labels) {
    if (y >= num_classes) throw ValidationError("ac_loss: label " + std::to_string(y) + " out of range");
  }
  require_unit_rows(features.value(), "feature");
  require_unit_rows(class_features.value(), "class feature");

  Graph& g = *features.graph();
  const Var inv_tau = ad::exp(ad::scale(log_tau, -1.0));
  const Var logits = ad::scale_by(ad::matmul(features, ad::transpose(class_features)), inv_tau);
  const Var forward = ad::nll_softmax(logits, labels);
  if (!symmetric) return forward;

  Tensor pick(labels.size(), num_classes);
  for (std::size_t b = 0; b < labels.size(); ++b) pick(b, labels[b]) = 1.0;
  const Var positives = ad::matmul(g.constant(std::move(pick)), class_features);  // B x d
  const Var reverse_logits = ad::scale_by(ad::matmul(positives, ad::transpose(features)), inv_tau);
  std::vector<std::size_t> diagonal(labels.size());
  for (std::size_t b = 0; b < diagonal.size(); ++b) diagonal[b] = b;
  const Var reverse = ad::nll_softmax(reverse_logits, diagonal);
  return ad::scale(ad::add(forward, reverse), 0.5);
}

std::vector<double> predict_probs(std::span<const double> feature, const Tensor& class_features, double tau) {
  if (!(tau > 0.0)) throw ValidationError("predict_probs: tau must be positive");
  if (feature.size() != class_features.cols()) throw ShapeError("predict_probs: dimension mismatch");
  std::vector<double> p(class_features.rows());
  for (std::size_t c = 0; c < p.size(); ++c) p[c] = cosine(feature, class_features.row_span(c)) / tau;
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) z += (v = std::exp(v - mx));
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace promptmil::losses
