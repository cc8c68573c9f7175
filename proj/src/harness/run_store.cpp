// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/run_store.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::harness {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json metrics_json(const EvalMetrics& m) {
  json j = {{"count", m.count}};
  if (m.auc) j["auc"] = *m.auc;
  if (m.macro_auc) j["macro_auc"] = *m.macro_auc;
  if (m.c_index) j["c_index"] = *m.c_index;
  return j;
}

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

}  // namespace

std::string params_to_json(const ParamStore& params) {
  json j = json::object();
  for (const auto& [name, t] : params) {
    const auto d = t.data();
    j[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::vector<double>(d.begin(), d.end())}};
  }
  return j.dump() + "\n";
}

ParamStore params_from_json(const std::string& text) {
  ParamStore out;
  try {
    const json j = json::parse(text);
    for (const auto& [name, v] : j.items()) {
      const auto rows = v.at("rows").get<std::size_t>();
      const auto cols = v.at("cols").get<std::size_t>();
      const auto data = v.at("data").get<std::vector<double>>();
      if (data.size() != rows * cols) throw ValidationError("params: '" + name + "' has the wrong element count");
      Tensor t(rows, cols);
      std::copy(data.begin(), data.end(), t.data().begin());
      out[name] = std::move(t);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("params: invalid JSON: ") + e.what());
  }
  return out;
}

std::string loss_curve_csv(const std::vector<losses::LossBreakdown>& curve) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "epoch,total,text,slide,patch,knowledge\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    const auto& c = curve[e];
    ss << e << ',' << c.total << ',' << c.text << ',' << c.slide << ',' << c.patch << ',' << c.knowledge << '\n';
  }
  return ss.str();
}

std::string run_result_to_json(const RunResult& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"train_ids", s.train_ids},
                     {"best_epoch", s.best_epoch},
                     {"best_loss", s.best_loss},
                     {"final_loss", s.curve.empty() ? 0.0 : s.curve.back().total},
                     {"params_digest", s.params_digest},
                     {"metrics", metrics_json(s.metrics)},
                     {"wall_seconds", s.wall_seconds}});
  }
  json agg = json::object();
  for (const auto& [name, v] : r.aggregate) agg[name] = {{"mean", v.mean}, {"stddev", v.stddev}};
  json j = {{"method", r.method},
            {"variant", r.variant},
            {"shots", r.shots},
            {"seeds", seeds},
            {"aggregate", agg},
            {"frozen_digest_before", r.frozen_digest_before},
            {"frozen_digest_after", r.frozen_digest_after}};
  return j.dump(2) + "\n";
}

void write_run(const std::filesystem::path& dir, const ExperimentConfig& cfg, const RunResult& result) {
  std::filesystem::create_directories(dir);
  io::write_text_atomic(dir / "config.json", experiment_config_to_json(cfg));
  for (const auto& s : result.seeds) {
    const auto sd = dir / seed_dir(s.seed);
    std::filesystem::create_directories(sd);
    io::write_text_atomic(sd / "params.json", params_to_json(s.params));
    io::write_text_atomic(sd / "loss_curve.csv", loss_curve_csv(s.curve));
  }
  io::write_text_atomic(dir / "metrics.json", run_result_to_json(result));
}

StoredRun load_run(const std::filesystem::path& dir) {
  StoredRun run{parse_experiment_config(read_file(dir / "config.json"), dir), {}};
  for (std::uint64_t seed : run.config.seeds) {
    const auto path = dir / seed_dir(seed) / "params.json";
    if (!std::filesystem::exists(path)) throw ValidationError("run: missing " + path.string());
    run.params.emplace_back(seed, params_from_json(read_file(path)));
  }
  return run;
}

}  // namespace promptmil::harness
