// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/harness/config.hpp"
#include "promptmil/harness/evaluator.hpp"
#include "promptmil/losses/objective.hpp"

namespace promptmil::harness {

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<losses::LossBreakdown> curve;  // one entry per epoch
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  ParamStore params;  // selected (lowest training loss) parameters
  std::string params_digest;
  EvalMetrics metrics;
  double wall_seconds = 0.0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for one seed
};

struct RunResult {
  std::string method;
  std::string variant;
  std::size_t shots = 0;
  std::vector<SeedResult> seeds;
  std::map<std::string, Summary> aggregate;  // metric name -> over seeds
  std::string frozen_digest_before;
  std::string frozen_digest_after;

  /// Equality of everything except wall-clock times.
  bool same_outcome(const RunResult& other) const;
};

Summary summarize(const std::vector<double>& values);

/// One seed: K-shot sample, full-batch Adam for cfg.epochs, best-loss
/// selection, test evaluation. A non-finite value aborts with NumericError;
/// when `checkpoint_dir` is non-empty the last finite parameters are written
/// there first.
SeedResult train_seed(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed,
                      const std::filesystem::path& checkpoint_dir = {});

/// All seeds of a config (in parallel up to cfg.jobs) against loaded data.
RunResult train(const ExperimentConfig& cfg, const ExperimentData& data);

/// Loads the data, trains, and writes the run directory when
/// cfg.output_dir is set.
RunResult train(const ExperimentConfig& cfg);

/// Same as train() with the method replaced by `name`; the run directory is
/// cfg.output_dir/<name>.
RunResult run_baseline(const std::string& name, ExperimentConfig cfg);

}  // namespace promptmil::harness
