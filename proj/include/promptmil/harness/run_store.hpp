// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/harness/config.hpp"
#include "promptmil/harness/trainer.hpp"

namespace promptmil::harness {

/// Shortest round-tripping decimal for every value.
std::string params_to_json(const ParamStore& params);
ParamStore params_from_json(const std::string& text);

std::string run_result_to_json(const RunResult& result);
std::string loss_curve_csv(const std::vector<losses::LossBreakdown>& curve);

/// Layout:
///   config.json             config snapshot
///   metrics.json            per-seed and aggregate metrics, digests
///   seed-<s>/params.json    selected parameters
///   seed-<s>/loss_curve.csv per-epoch loss breakdown
/// Every file is written to a temporary name and renamed into place.
void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg, const RunResult& result);

struct StoredRun {
  ExperimentConfig config;
  std::vector<std::pair<std::uint64_t, ParamStore>> params;  // by seed
};

StoredRun load_run(const std::filesystem::path& dir);

}  // namespace promptmil::harness
