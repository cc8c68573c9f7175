// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/mil/example_bank.hpp"

#include <cmath>

#include "promptmil/common/digest.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::mil {

void ExampleBank::validate(std::size_t num_classes) const {
  if (patches.rows() == 0) throw ValidationError("example bank: no patch examples");
  if (patches.rows() != patch_tags.size()) {
    throw ValidationError("example bank: " + std::to_string(patches.rows()) + " patch examples but " +
                          std::to_string(patch_tags.size()) + " tags");
  }
  std::vector<std::size_t> patch_count(num_classes, 0);
  std::vector<std::size_t> slide_count(num_classes, 0);
  for (std::size_t t : patch_tags) {
    if (t >= num_classes) throw ValidationError("example bank: patch tag out of range");
    ++patch_count[t];
  }
  for (const auto& s : slides) {
    if (s.label >= num_classes) throw ValidationError("example bank: slide tag out of range");
    if (s.features.cols() != dim() || s.features.rows() == 0) {
      throw ShapeError("example bank: slide '" + s.id + "' features " + s.features.shape_string());
    }
    ++slide_count[s.label];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (patch_count[c] == 0 || slide_count[c] == 0) {
      throw ValidationError("example bank: class " + std::to_string(c) +
                            " needs at least one patch example and one slide example");
    }
  }
  for (std::size_t r = 0; r < patches.rows(); ++r) {
    if (std::abs(norm(patches.row_span(r)) - 1.0) > 1e-6) {
      throw ValidationError("example bank: patch example " + std::to_string(r) + " is not unit-norm");
    }
  }
}

std::vector<std::size_t> ExampleBank::slide_tags() const {
  std::vector<std::size_t> tags;
  for (const auto& s : slides) tags.push_back(s.label);
  return tags;
}

std::string ExampleBank::digest() const {
  Sha256 sha;
  sha.update(patches.data());
  for (std::size_t t : patch_tags) sha.update_u64(t);
  for (const auto& s : slides) {
    sha.update(s.id);
    sha.update_u64(s.label);
    sha.update(s.features.data());
  }
  return sha.hex();
}

ExampleBank load_example_bank(const io::Manifest& manifest, const encoders::ImageFeatureSource& source) {
  ExampleBank bank;
  bank.patches = io::read_embeddings(manifest.resolve(manifest.patch_bank), manifest.dim);
  for (std::size_t r = 0; r < bank.patches.rows(); ++r) {
    auto row = bank.patches.row_span(r);
    const double n = norm(row);
    if (n == 0.0) throw ValidationError("example bank: zero patch example " + std::to_string(r));
    for (double& v : row) v /= n;
  }
  bank.patch_tags = manifest.patch_tags;
  for (const auto& ref : manifest.slide_examples) {
    bank.slides.push_back({ref.id, ref.label, source.bag(ref.id).features});
  }
  bank.validate(manifest.num_classes());
  return bank;
}

}  // namespace promptmil::mil
