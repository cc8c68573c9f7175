// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/encoders/feature_source.hpp"
#include "promptmil/harness/config.hpp"
#include "promptmil/mil/example_bank.hpp"
#include "promptmil/mil/model.hpp"
#include "promptmil/prompts/prompts.hpp"

namespace promptmil::harness {

/// Everything frozen an experiment reads: manifest, features, example bank
/// and the text backend (absent for linear-head methods).
struct ExperimentData {
  io::Manifest manifest;
  encoders::ImageFeatureSource source;
  mil::ExampleBank bank;
  std::optional<prompts::TextBackend> text;

  static ExperimentData load(const ExperimentConfig& cfg);
  /// Digest of bank, bag features and text backend.
  std::string frozen_digest() const;
};

struct EvalMetrics {
  std::size_t count = 0;
  std::optional<double> auc;        // two classes
  std::optional<double> macro_auc;  // three or more classes
  std::optional<double> c_index;    // survival manifests

  /// C-index for survival tasks, else AUC, else macro AUC.
  double primary() const;
  std::string primary_name() const;
};

/// Forward-only view of one trained model. Example features Z, text features
/// and tau are computed once; each bag then gets its own small graph, so
/// predictions may run in parallel.
class Predictor {
 public:
  Predictor(const ParamStore& params, const mil::ModelSpec& spec, const ExperimentData& data);

  struct Output {
    std::vector<double> probs;
    std::vector<double> attention;
    mil::PatchMatch patches;
    std::optional<std::size_t> slide_match;
    double slide_cosine = 0.0;
  };
  Output predict(const Tensor& bag) const;

  const mil::ModelSpec& spec() const { return spec_; }

 private:
  const ParamStore& params_;
  mil::ModelSpec spec_;
  const ExperimentData& data_;
  std::optional<Tensor> z_;
  Tensor text_;
  double tau_ = 1.0;
};

struct BagPrediction {
  std::string id;
  std::size_t label = 0;
  std::vector<double> probs;
};

struct Evaluation {
  EvalMetrics metrics;
  std::vector<BagPrediction> predictions;
};

/// Metrics over the given predictions. Survival risk is the probability of
/// class 0, the poor-prognosis class. Throws on a single-class split.
EvalMetrics compute_metrics(const std::vector<BagPrediction>& predictions, const io::Manifest& manifest);

Evaluation evaluate(const ParamStore& params, const mil::ModelSpec& spec, const ExperimentData& data,
                    io::Split split, std::size_t jobs = 1);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions propagate
/// (the first one wins).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace promptmil::harness
