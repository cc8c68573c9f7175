// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "promptmil/common/digest.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/losses/ac_loss.hpp"
#include "promptmil/losses/metrics.hpp"

namespace promptmil::harness {

ExperimentData ExperimentData::load(const ExperimentConfig& cfg) {
  io::Manifest manifest = io::load_manifest(cfg.manifest);
  if (cfg.prompts) {
    if (cfg.prompts->size() != manifest.num_classes()) {
      throw ValidationError("config: " + std::to_string(cfg.prompts->size()) + " prompt triples for " +
                            std::to_string(manifest.num_classes()) + " classes");
    }
    manifest.prompts = *cfg.prompts;
  }
  encoders::ImageFeatureSource source(manifest);
  mil::ExampleBank bank = mil::load_example_bank(manifest, source);
  bank.validate(manifest.num_classes());
  const mil::ModelSpec spec = cfg.model_spec(manifest.dim, manifest.num_classes());
  std::optional<prompts::TextBackend> text;
  if (spec.uses_text()) text = prompts::make_backend(manifest, spec, cfg.toy_encoder_seed);
  return ExperimentData{std::move(manifest), std::move(source), std::move(bank), std::move(text)};
}

std::string ExperimentData::frozen_digest() const {
  Sha256 h;
  h.update(bank.digest());
  for (const auto& e : manifest.entries) {
    h.update(e.id);
    h.update(source.bag(e.id).features.data());
  }
  h.update(text ? text->digest() : std::string("no-text"));
  return h.hex();
}

double EvalMetrics::primary() const {
  if (c_index) return *c_index;
  if (auc) return *auc;
  if (macro_auc) return *macro_auc;
  throw ValidationError("no metric available");
}

std::string EvalMetrics::primary_name() const {
  if (c_index) return "c_index";
  if (auc) return "auc";
  return "macro_auc";
}

Predictor::Predictor(const ParamStore& params, const mil::ModelSpec& spec, const ExperimentData& data)
    : params_(params), spec_(spec), data_(data) {
  Graph g;
  const BoundParams bound(g, params_);
  mil::VisualPathway pathway(bound, spec_, data_.bank);
  const mil::ModelFlags flags = spec_.effective_flags();
  if (flags.slide_examples && flags.text_end) z_ = pathway.example_features().value();
  if (flags.text_end) {
    if (!data_.text) throw ValidationError("predictor: text backend required for this method");
    text_ = prompts::build_text_features(g, bound, *data_.text).task.value();
    tau_ = std::exp(params_.at(mil::pname::kLogTau)(0, 0));
  }
}

Predictor::Output Predictor::predict(const Tensor& bag) const {
  Graph g;
  const BoundParams bound(g, params_);
  mil::VisualPathway pathway(bound, spec_, data_.bank);
  if (z_) pathway.use_example_features(*z_);
  mil::BagOutput o = pathway.forward(bag);
  Output out;
  const Tensor& head = o.output.value();
  if (spec_.uses_text()) {
    out.probs = losses::predict_probs(head.row_span(0), text_, tau_);
  } else {
    out.probs.assign(head.data().begin(), head.data().end());
    const double mx = *std::max_element(out.probs.begin(), out.probs.end());
    double z = 0.0;
    for (auto& v : out.probs) z += (v = std::exp(v - mx));
    for (auto& v : out.probs) v /= z;
  }
  const auto a = o.attention.value().data();
  out.attention.assign(a.begin(), a.end());
  out.patches = std::move(o.patches);
  out.slide_match = o.slide_match;
  out.slide_cosine = o.slide_cosine;
  return out;
}

EvalMetrics compute_metrics(const std::vector<BagPrediction>& predictions, const io::Manifest& manifest) {
  if (predictions.empty()) throw ValidationError("evaluate: empty split");
  const std::size_t u = manifest.num_classes();
  EvalMetrics m;
  m.count = predictions.size();
  std::vector<std::size_t> labels;
  for (const auto& p : predictions) labels.push_back(p.label);
  if (std::all_of(labels.begin(), labels.end(), [&](std::size_t y) { return y == labels.front(); })) {
    throw ValidationError("evaluate: split contains a single class");
  }
  if (u == 2) {
    std::vector<double> scores;
    std::vector<int> y;
    for (const auto& p : predictions) {
      scores.push_back(p.probs.at(1));
      y.push_back(static_cast<int>(p.label));
    }
    m.auc = losses::auc(scores, y);
  } else {
    Tensor probs(predictions.size(), u);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      for (std::size_t c = 0; c < u; ++c) probs(i, c) = predictions[i].probs.at(c);
    }
    m.macro_auc = losses::macro_auc_ovr(probs, labels);
  }
  if (manifest.is_survival()) {
    std::vector<double> risks;
    std::vector<losses::SurvivalRecord> records;
    for (const auto& p : predictions) {
      const io::ManifestEntry* e = manifest.find(p.id);
      if (e == nullptr || !e->time || !e->event) {
        throw ValidationError("evaluate: survival record missing for '" + p.id + "'");
      }
      risks.push_back(p.probs.at(0));
      records.push_back({*e->time, *e->event});
    }
    m.c_index = losses::c_index(risks, records);
  }
  return m;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

Evaluation evaluate(const ParamStore& params, const mil::ModelSpec& spec, const ExperimentData& data,
                    io::Split split, std::size_t jobs) {
  const auto indices = data.manifest.split_indices(split);
  if (indices.empty()) throw ValidationError("evaluate: split is empty");
  const Predictor predictor(params, spec, data);
  Evaluation ev;
  ev.predictions.resize(indices.size());
  parallel_for(indices.size(), jobs, [&](std::size_t i) {
    const io::ManifestEntry& e = data.manifest.entries[indices[i]];
    ev.predictions[i] = {e.id, e.label, predictor.predict(data.source.bag(e.id).features).probs};
  });
  ev.metrics = compute_metrics(ev.predictions, data.manifest);
  return ev;
}

}  // namespace promptmil::harness
