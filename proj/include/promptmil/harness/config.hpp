// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "promptmil/autodiff/adam.hpp"
#include "promptmil/io/manifest.hpp"
#include "promptmil/losses/objective.hpp"
#include "promptmil/mil/model.hpp"

namespace promptmil::harness {

/// Model sizes that are not fixed by the manifest. d always comes from the
/// manifest; d_w and d_p default to 2d and d.
struct ModelOverrides {
  std::size_t hidden = 128;
  std::optional<std::size_t> d_w;
  std::optional<std::size_t> d_p;
  std::size_t m_alpha = 8;
  std::size_t m_beta = 8;
  std::size_t m_gamma = 8;
  std::size_t top_k = 1;
  double messenger_init_scale = 4.0;
  double projector_init_gain = 5.0;
};

struct ExperimentConfig {
  std::filesystem::path manifest;  // absolute after loading
  std::size_t shots = 4;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t epochs = 100;
  AdamHyper optimizer;
  losses::LossConfig loss;
  ModelOverrides model;
  mil::Method method = mil::Method::kPemp;
  /// Named ablation applied on top of `flags` (empty = none).
  std::string variant;
  mil::ModelFlags flags;
  mil::TextBackendKind text_backend = mil::TextBackendKind::kStatic;
  std::uint64_t toy_encoder_seed = 20240601;
  /// Replaces the manifest's prompt texts when present.
  std::optional<std::vector<io::ClassPrompt>> prompts;
  std::filesystem::path output_dir;  // absolute after loading
  std::size_t jobs = 1;
  std::vector<std::size_t> ablation_shots{2, 4};

  void validate() const;
  /// Model spec for a manifest of the given dimension and class count, with
  /// `variant` applied.
  mil::ModelSpec model_spec(std::size_t dim, std::size_t num_classes) const;
  /// Loss config with `variant` applied.
  losses::LossConfig loss_config() const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Canonical JSON with absolute paths; parse(to_json(c)) == c.
std::string experiment_config_to_json(const ExperimentConfig& cfg);

}  // namespace promptmil::harness
