// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "promptmil/io/binary_format.hpp"
#include "promptmil/io/manifest.hpp"

namespace promptmil::encoders {

/// Reads one bag of precomputed patch features. Rejects n = 0, a dim that
/// differs from `expected_dim`, and any format violation.
io::Bag load_patch_features(const std::filesystem::path& path, std::size_t expected_dim);

/// Precomputed image features for every slide a manifest references
/// (entries and standalone slide examples), keyed by id. Immutable after
/// loading; shared read-only by evaluation workers.
class ImageFeatureSource {
 public:
  explicit ImageFeatureSource(const io::Manifest& manifest);

  std::size_t dim() const noexcept { return dim_; }
  /// Throws ValidationError for unknown ids.
  const io::Bag& bag(const std::string& id) const;
  bool contains(const std::string& id) const { return bags_.contains(id); }
  std::size_t size() const noexcept { return bags_.size(); }

 private:
  std::size_t dim_;
  std::map<std::string, io::Bag> bags_;
};

}  // namespace promptmil::encoders
