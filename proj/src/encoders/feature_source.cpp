// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/encoders/feature_source.hpp"

#include "promptmil/common/error.hpp"

namespace promptmil::encoders {

io::Bag load_patch_features(const std::filesystem::path& path, std::size_t expected_dim) {
  return io::read_bag(path, expected_dim);
}

ImageFeatureSource::ImageFeatureSource(const io::Manifest& manifest) : dim_(manifest.dim) {
  for (const auto& e : manifest.entries) {
    io::Bag bag = load_patch_features(manifest.resolve(e.bag), dim_);
    if (bag.label != e.label) {
      throw ValidationError("bag '" + e.id + "' stores label " + std::to_string(bag.label) +
                            " but the manifest says " + std::to_string(e.label));
    }
    bags_.emplace(e.id, std::move(bag));
  }
  for (const auto& s : manifest.slide_examples) {
    if (s.bag.empty()) continue;
    bags_.emplace(s.id, load_patch_features(manifest.resolve(s.bag), dim_));
  }
}

const io::Bag& ImageFeatureSource::bag(const std::string& id) const {
  auto it = bags_.find(id);
  if (it == bags_.end()) throw ValidationError("no bag loaded for id '" + id + "'");
  return it->second;
}

}  // namespace promptmil::encoders
