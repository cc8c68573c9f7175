// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptmil/harness/evaluator.hpp"

namespace promptmil::harness {

struct PatchReport {
  std::size_t patch = 0;
  double attention = 0.0;
  std::size_t matched_example = 0;
  std::size_t matched_tag = 0;
  double cosine = 0.0;
  std::optional<bool> key;  // known for planted data only
};

struct BagReport {
  std::string id;
  std::size_t label = 0;
  std::optional<std::string> slide_example;
  double slide_cosine = 0.0;
  std::vector<PatchReport> top_patches;  // by attention, highest first
};

struct MatchReport {
  std::vector<BagReport> bags;
  /// Fraction of bags whose highest-attention patch is a planted key patch;
  /// absent when the manifest has no key-patch annotations.
  std::optional<double> key_hit_rate;

  std::string to_json() const;
  std::string to_csv() const;
};

/// Report over the test split. Attention ties keep the lower patch index.
MatchReport match_report(const Predictor& predictor, const ExperimentData& data, std::size_t top_k);

}  // namespace promptmil::harness
