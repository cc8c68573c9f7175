// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/tensor.hpp"
#include "promptmil/io/manifest.hpp"

namespace promptmil::encoders {

/// Precomputed per-class text features for the three prompt groups, each
/// U x d with unit rows.
struct StaticTextFeatures {
  Tensor task;
  Tensor slide_description;
  Tensor patch_description;

  /// Normalizes rows in place; throws on zero rows or shape disagreement.
  void normalize_and_check();
  std::string digest() const;
};

/// Loads the manifest's static_text section (PEB1 files).
StaticTextFeatures load_static_text(const io::Manifest& manifest);

/// l2-normalize(base + delta). `base` is one 1 x d class row; the gradient
/// flows to `delta` only.
Var encode_text_static(Graph& graph, const Tensor& base, Var delta);

}  // namespace promptmil::encoders
