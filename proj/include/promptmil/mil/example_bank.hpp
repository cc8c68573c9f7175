// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "promptmil/autodiff/tensor.hpp"
#include "promptmil/encoders/feature_source.hpp"
#include "promptmil/io/manifest.hpp"

namespace promptmil::mil {

struct SlideExample {
  std::string id;
  std::size_t label = 0;
  Tensor features;  // n x d patch features of the example slide
};

/// Class-tagged visual prompts. Patch examples are fixed unit vectors; slide
/// examples are bags that go through the trainable pathway on every pass.
struct ExampleBank {
  Tensor patches;  // L x d, unit rows
  std::vector<std::size_t> patch_tags;
  std::vector<SlideExample> slides;

  std::size_t dim() const { return patches.cols(); }
  /// Requires >= 1 patch and >= 1 slide example per class and unit rows.
  void validate(std::size_t num_classes) const;
  std::vector<std::size_t> slide_tags() const;
  std::string digest() const;
};

ExampleBank load_example_bank(const io::Manifest& manifest, const encoders::ImageFeatureSource& source);

}  // namespace promptmil::mil
