// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "promptmil/io/manifest.hpp"

namespace promptmil::io {

/// Planted multi-instance task. Each class owns a few unit-norm prototype
/// directions; a bag of class c mixes noisy copies of its prototypes ("key
/// patches", prevalence pi_c) with background patches drawn from a pool
/// shared by all classes, so single patches are ambiguous and aggregation
/// matters.
struct SyntheticConfig {
  std::size_t num_classes = 2;
  std::size_t dim = 64;
  std::size_t train_per_class = 128;
  std::size_t test_per_class = 100;
  std::size_t min_patches = 50;
  std::size_t max_patches = 200;
  /// Key-pattern prevalence per class; a single value is broadcast.
  std::vector<double> prevalence{0.1};
  /// Per-coordinate standard deviation of patch noise.
  double noise = 0.1;
  std::size_t prototypes_per_class = 3;
  /// Squared cosine each key prototype shares with one common direction
  /// (0 = independent prototypes).
  double shared_key_component = 0.7;
  std::size_t background_patterns = 12;
  /// Background patterns present in any one bag (0 = all of them), drawn
  /// per bag, so tissue composition varies from slide to slide.
  std::size_t background_per_bag = 0;
  double censoring_rate = 0.2;
  std::size_t patch_examples_per_class = 3;
  std::size_t slide_examples_per_class = 3;
  /// Prevalence used for the slide-example bags.
  double example_prevalence = 0.5;
  /// Per-coordinate noise on patch-bank vectors and static text features.
  double bank_noise = 0.02;
  double text_noise = 0.05;
  bool survival = true;
  std::uint64_t seed = 0;

  double prevalence_of(std::size_t c) const;
  /// Throws ValidationError.
  void validate() const;
};

SyntheticConfig synthetic_config_from_json(const std::string& json_text);
std::string synthetic_config_to_json(const SyntheticConfig& cfg);

/// Writes manifest.json, bags/, examples/, bank/ and text/ under `out_dir`
/// and returns the manifest. Deterministic in `cfg`.
Manifest generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace promptmil::io
