// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "promptmil/harness/config.hpp"
#include "promptmil/harness/trainer.hpp"

namespace promptmil::harness {

struct Variant {
  std::string name;   // CLI / config identifier
  std::string label;  // row label in reports
};

/// The full model followed by the eight reduced variants.
const std::vector<Variant>& ablation_variants();

/// Applies a named variant to PEMP flags and loss weights. Throws
/// ValidationError listing valid names for an unknown one.
void apply_variant(const std::string& name, mil::ModelFlags& flags, losses::LossConfig& loss);

struct AblationCell {
  double mean = 0.0;
  double stddev = 0.0;
};

struct AblationTable {
  std::string metric;  // "auc", "c_index" or "macro_auc"
  std::vector<std::size_t> shots;
  std::vector<std::string> rows;
  std::vector<std::vector<AblationCell>> cells;  // rows x shots

  std::string to_csv() const;
  std::string to_json() const;
  std::string to_text() const;
};

/// Trains every variant for every shot count in cfg.ablation_shots over the
/// config's seeds. Writes ablation.{csv,json,txt} under cfg.output_dir when it
/// is set.
AblationTable run_ablation_matrix(const ExperimentConfig& cfg);

}  // namespace promptmil::harness
