// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 2 invalid input,
// 3 numeric failure, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/harness/ablation.hpp"
#include "promptmil/harness/gradcheck_suite.hpp"
#include "promptmil/harness/match_report.hpp"
#include "promptmil/harness/run_store.hpp"
#include "promptmil/harness/trainer.hpp"
#include "promptmil/io/binary_format.hpp"
#include "promptmil/io/synthetic.hpp"

namespace fs = std::filesystem;
using namespace promptmil;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_run(const harness::RunResult& r) {
  for (const auto& s : r.seeds) {
    std::printf("seed %llu  best_epoch %zu  loss %.6f  %s %.4f  (%.1fs)\n", static_cast<unsigned long long>(s.seed),
                s.best_epoch, s.best_loss, s.metrics.primary_name().c_str(), s.metrics.primary(), s.wall_seconds);
  }
  for (const auto& [name, v] : r.aggregate) std::printf("%s: %.4f +- %.4f\n", name.c_str(), v.mean, v.stddev);
}

int cmd_gen(const fs::path& config, const fs::path& out) {
  const io::SyntheticConfig cfg = io::synthetic_config_from_json(read_file(config));
  const io::Manifest m = io::generate_synthetic(cfg, out);
  std::printf("wrote %zu bags to %s\n", m.entries.size(), out.string().c_str());
  return kExitOk;
}

int cmd_train(const fs::path& config) {
  const harness::ExperimentConfig cfg = harness::load_experiment_config(config);
  print_run(harness::train(cfg));
  std::printf("run written to %s\n", cfg.output_dir.string().c_str());
  return kExitOk;
}

int cmd_baseline(const std::string& name, const fs::path& config) {
  const harness::ExperimentConfig cfg = harness::load_experiment_config(config);
  print_run(harness::run_baseline(name, cfg));
  std::printf("run written to %s\n", (cfg.output_dir / name).string().c_str());
  return kExitOk;
}

int cmd_eval(const fs::path& run_dir, const std::string& split_name) {
  const io::Split split = io::parse_split(split_name);
  const harness::StoredRun run = harness::load_run(run_dir);
  const harness::ExperimentData data = harness::ExperimentData::load(run.config);
  const mil::ModelSpec spec = run.config.model_spec(data.manifest.dim, data.manifest.num_classes());
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [seed, params] : run.params) {
    const harness::Evaluation ev = harness::evaluate(params, spec, data, split, run.config.jobs);
    nlohmann::json j = {{"seed", seed}, {"count", ev.metrics.count}};
    if (ev.metrics.auc) j["auc"] = *ev.metrics.auc;
    if (ev.metrics.macro_auc) j["macro_auc"] = *ev.metrics.macro_auc;
    if (ev.metrics.c_index) j["c_index"] = *ev.metrics.c_index;
    std::printf("seed %llu  %s %.4f\n", static_cast<unsigned long long>(seed), ev.metrics.primary_name().c_str(),
                ev.metrics.primary());
    out.push_back(j);
  }
  io::write_text_atomic(run_dir / ("eval-" + split_name + ".json"), out.dump(2) + "\n");
  return kExitOk;
}

int cmd_ablate(const fs::path& config) {
  const harness::ExperimentConfig cfg = harness::load_experiment_config(config);
  std::fputs(harness::run_ablation_matrix(cfg).to_text().c_str(), stdout);
  return kExitOk;
}

int cmd_gradcheck(double tol, std::size_t trials, double h, std::uint64_t seed) {
  bool ok = true;
  for (const auto& t : harness::run_gradcheck_suite(trials, tol, h, seed)) {
    std::printf("%s  %-50s max rel err %.3e\n", t.report.passed ? "ok  " : "FAIL", t.description.c_str(),
                t.report.max_rel_error);
    ok = ok && t.report.passed;
  }
  return ok ? kExitOk : kExitNumeric;
}

int cmd_match_report(const fs::path& run_dir, std::size_t top_k, std::optional<std::uint64_t> seed) {
  const harness::StoredRun run = harness::load_run(run_dir);
  const harness::ExperimentData data = harness::ExperimentData::load(run.config);
  const mil::ModelSpec spec = run.config.model_spec(data.manifest.dim, data.manifest.num_classes());
  const ParamStore* params = nullptr;
  std::uint64_t used = 0;
  for (const auto& [s, p] : run.params) {
    if (!seed || *seed == s) {
      params = &p;
      used = s;
      break;
    }
  }
  if (params == nullptr) throw ValidationError("match-report: seed not found in run");
  const harness::Predictor predictor(*params, spec, data);
  const harness::MatchReport report = harness::match_report(predictor, data, top_k);
  const std::string stem = "match_report-seed-" + std::to_string(used);
  io::write_text_atomic(run_dir / (stem + ".json"), report.to_json());
  io::write_text_atomic(run_dir / (stem + ".csv"), report.to_csv());
  std::printf("%zu bags reported", report.bags.size());
  if (report.key_hit_rate) std::printf(", top-attention key-patch rate %.3f", *report.key_hit_rate);
  std::printf("\n");
  return kExitOk;
}

int cmd_validate(const fs::path& file) {
  const std::string ext = file.extension().string();
  if (ext == ".pbag") {
    const io::Bag b = io::read_bag(file);
    std::printf("PBAG ok: %zu x %zu, label %u\n", b.features.rows(), b.features.cols(), b.label);
  } else if (ext == ".peb1") {
    const Tensor t = io::read_embeddings(file);
    std::printf("PEB1 ok: %zu x %zu\n", t.rows(), t.cols());
  } else if (ext == ".json") {
    const io::Manifest m = io::load_manifest(file);
    std::printf("manifest ok: %zu entries, %zu classes, dim %zu\n", m.entries.size(), m.num_classes(), m.dim);
  } else {
    throw ValidationError("validate: unknown file type '" + ext + "' (expected .pbag, .peb1 or .json)");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot multi-instance prompt learning over precomputed embeddings"};
  app.require_subcommand(1);

  fs::path config, out, run_dir, file;
  std::string name, split = "test";
  double tol = 1e-5, h = 1e-5;
  std::size_t trials = 20, top_k = 5;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> report_seed;

  auto* gen = app.add_subcommand("gen", "Generate a planted synthetic dataset");
  gen->add_option("--config", config, "Synthetic config JSON")->required();
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train over all configured seeds");
  train->add_option("--config", config, "Experiment config JSON")->required();

  auto* eval = app.add_subcommand("eval", "Re-evaluate a stored run");
  eval->add_option("--run", run_dir, "Run directory")->required();
  eval->add_option("--split", split, "test or train-pool");

  auto* baseline = app.add_subcommand("baseline", "Train a baseline method");
  baseline->add_option("--name", name, "linearprobe, vpt, coop or kgcoop")->required();
  baseline->add_option("--config", config, "Experiment config JSON")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the ablation matrix");
  ablate->add_option("--config", config, "Experiment config JSON")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training objective");
  gradcheck->add_option("--tol", tol, "Relative tolerance");
  gradcheck->add_option("--trials", trials, "Number of random configurations");
  gradcheck->add_option("--step", h, "Central-difference step");
  gradcheck->add_option("--seed", seed, "Base seed");

  auto* report = app.add_subcommand("match-report", "Example matching and attention report for a run");
  report->add_option("--run", run_dir, "Run directory")->required();
  report->add_option("--top-k", top_k, "Patches per bag");
  report->add_option("--seed", report_seed, "Seed whose parameters to use (default: first)");

  auto* validate = app.add_subcommand("validate", "Check a PBAG, PEB1 or manifest file");
  validate->add_option("file", file, "File to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) return cmd_gen(config, out);
    if (*train) return cmd_train(config);
    if (*eval) return cmd_eval(run_dir, split);
    if (*baseline) return cmd_baseline(name, config);
    if (*ablate) return cmd_ablate(config);
    if (*gradcheck) return cmd_gradcheck(tol, trials, h, seed);
    if (*report) return cmd_match_report(run_dir, top_k, report_seed);
    if (*validate) return cmd_validate(file);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
