// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "promptmil/autodiff/adam.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/harness/run_store.hpp"
#include "promptmil/io/binary_format.hpp"
#include "promptmil/io/kshot.hpp"

namespace promptmil::harness {

namespace {

bool same_breakdown(const losses::LossBreakdown& a, const losses::LossBreakdown& b) {
  return a.total == b.total && a.text == b.text && a.slide == b.slide && a.patch == b.patch &&
         a.knowledge == b.knowledge;
}

bool same_metrics(const EvalMetrics& a, const EvalMetrics& b) {
  return a.count == b.count && a.auc == b.auc && a.macro_auc == b.macro_auc && a.c_index == b.c_index;
}

void add_metric(std::map<std::string, std::vector<double>>& acc, const char* name, const std::optional<double>& v) {
  if (v) acc[name].push_back(*v);
}

}  // namespace

bool RunResult::same_outcome(const RunResult& o) const {
  if (method != o.method || variant != o.variant || shots != o.shots || seeds.size() != o.seeds.size() ||
      frozen_digest_before != o.frozen_digest_before || frozen_digest_after != o.frozen_digest_after) {
    return false;
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SeedResult& a = seeds[i];
    const SeedResult& b = o.seeds[i];
    if (a.seed != b.seed || a.train_ids != b.train_ids || a.best_epoch != b.best_epoch ||
        a.best_loss != b.best_loss || a.params != b.params || a.params_digest != b.params_digest ||
        !same_metrics(a.metrics, b.metrics) || a.curve.size() != b.curve.size()) {
      return false;
    }
    for (std::size_t e = 0; e < a.curve.size(); ++e) {
      if (!same_breakdown(a.curve[e], b.curve[e])) return false;
    }
  }
  if (aggregate.size() != o.aggregate.size()) return false;
  for (const auto& [k, v] : aggregate) {
    const auto it = o.aggregate.find(k);
    if (it == o.aggregate.end() || it->second.mean != v.mean || it->second.stddev != v.stddev) return false;
  }
  return true;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

SeedResult train_seed(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed,
                      const std::filesystem::path& checkpoint_dir) {
  const auto start = std::chrono::steady_clock::now();
  const io::Manifest& manifest = data.manifest;
  const mil::ModelSpec spec = cfg.model_spec(manifest.dim, manifest.num_classes());
  const losses::LossConfig loss_cfg = cfg.loss_config();
  if (spec.uses_text() && !data.text) throw ValidationError("train: text backend not loaded");

  SeedResult r;
  r.seed = seed;
  const auto chosen = io::kshot_sample(manifest, cfg.shots, seed);
  losses::Batch batch;
  for (std::size_t idx : chosen) {
    const io::ManifestEntry& e = manifest.entries[idx];
    if (e.split != io::Split::kTrainPool) {
      throw ValidationError("train: K-shot sample includes non-training entry '" + e.id + "'");
    }
    r.train_ids.push_back(e.id);
    batch.bags.push_back(&data.source.bag(e.id).features);
    batch.labels.push_back(e.label);
  }

  ParamStore params = mil::init_params(spec, seed, loss_cfg.tau0);
  AdamState adam;
  adam.hyper = cfg.optimizer;
  const prompts::TextBackend* text = data.text ? &*data.text : nullptr;
  std::size_t epoch = 0;
  try {
    for (; epoch < cfg.epochs; ++epoch) {
      Graph g;
      const BoundParams bound(g, params);
      const losses::Objective obj = losses::build_objective(bound, spec, data.bank, text, batch, loss_cfg);
      r.curve.push_back(obj.parts);
      if (epoch == 0 || obj.parts.total < r.best_loss) {
        r.best_loss = obj.parts.total;
        r.best_epoch = epoch;
        r.params = params;
      }
      const GradientMap grads = g.backward(obj.total);
      adam_step(params, grads, adam);
      mil::clamp_temperature(params);
    }
  } catch (const NumericError& e) {
    std::string where;
    if (!checkpoint_dir.empty()) {
      const auto path = checkpoint_dir / ("seed-" + std::to_string(seed)) / "last_good_params.json";
      std::filesystem::create_directories(path.parent_path());
      io::write_text_atomic(path, params_to_json(params));
      where = "; last finite parameters written to " + path.string();
    }
    throw NumericError("training diverged at seed " + std::to_string(seed) + ", epoch " + std::to_string(epoch) +
                       ": " + e.what() + where);
  }
  r.params_digest = digest(r.params);
  r.metrics = evaluate(r.params, spec, data, io::Split::kTest).metrics;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

RunResult train(const ExperimentConfig& cfg, const ExperimentData& data) {
  cfg.validate();
  RunResult result;
  result.method = mil::method_name(cfg.method);
  result.variant = cfg.variant;
  result.shots = cfg.shots;
  result.frozen_digest_before = data.frozen_digest();
  result.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    result.seeds[i] = train_seed(cfg, data, cfg.seeds[i], cfg.output_dir);
  });
  result.frozen_digest_after = data.frozen_digest();
  std::map<std::string, std::vector<double>> acc;
  for (const auto& s : result.seeds) {
    add_metric(acc, "auc", s.metrics.auc);
    add_metric(acc, "macro_auc", s.metrics.macro_auc);
    add_metric(acc, "c_index", s.metrics.c_index);
  }
  for (const auto& [name, values] : acc) result.aggregate[name] = summarize(values);
  return result;
}

RunResult train(const ExperimentConfig& cfg) {
  cfg.validate();
  const ExperimentData data = ExperimentData::load(cfg);
  RunResult result = train(cfg, data);
  if (!cfg.output_dir.empty()) write_run(cfg.output_dir, cfg, result);
  return result;
}

RunResult run_baseline(const std::string& name, ExperimentConfig cfg) {
  const mil::Method m = mil::parse_method(name);
  if (m == mil::Method::kPemp) throw ValidationError("baseline: 'pemp' is not a baseline (valid: linearprobe, vpt, coop, kgcoop)");
  cfg.method = m;
  cfg.variant.clear();
  if (!cfg.output_dir.empty()) cfg.output_dir /= name;
  return train(cfg);
}

}  // namespace promptmil::harness
