// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/ablation.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::harness {

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> variants{
      {"full", "PEMP"},
      {"no-examples", "PEMP w/o v&t em."},
      {"vision-only", "PEMP vision only"},
      {"no-vision-examples", "PEMP w/o vision em."},
      {"no-text-examples", "PEMP w/o text em."},
      {"no-summary", "PEMP w/o Summary Layer"},
      {"no-messenger", "PEMP w/o Messenger Layer"},
      {"no-slide-prompts", "PEMP w/o Slide-level Prompts"},
      {"no-example-loss", "PEMP w/o AC-Loss"},
  };
  return variants;
}

void apply_variant(const std::string& name, mil::ModelFlags& f, losses::LossConfig& loss) {
  using mil::ExampleAlignment;
  if (name == "full") return;
  if (name == "no-examples") {
    f.patch_examples = f.slide_examples = false;
    f.alignment = ExampleAlignment::kNone;
    loss.lambda1 = loss.lambda2 = 0.0;
  } else if (name == "vision-only") {
    f.text_end = false;
  } else if (name == "no-vision-examples") {
    f.patch_examples = f.slide_examples = false;
    f.alignment = ExampleAlignment::kTrainingSlides;
  } else if (name == "no-text-examples") {
    f.alignment = ExampleAlignment::kTaskText;
  } else if (name == "no-summary") {
    f.summary = false;
  } else if (name == "no-messenger") {
    f.messenger = false;
  } else if (name == "no-slide-prompts") {
    f.slide_examples = f.slide_prompt = false;
  } else if (name == "no-example-loss") {
    f.alignment = ExampleAlignment::kNone;
    loss.lambda1 = loss.lambda2 = 0.0;
  } else {
    std::string valid;
    for (const auto& v : ablation_variants()) valid += (valid.empty() ? "" : ", ") + v.name;
    throw ValidationError("unknown variant '" + name + "' (valid: " + valid + ")");
  }
}

std::string AblationTable::to_csv() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "variant";
  for (std::size_t k : shots) ss << ',' << k << "-shot mean," << k << "-shot std";
  ss << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ss << '"' << rows[r] << '"';
    for (const auto& c : cells[r]) ss << ',' << c.mean << ',' << c.stddev;
    ss << '\n';
  }
  return ss.str();
}

std::string AblationTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : cells[r]) cols.push_back({{"mean", c.mean}, {"stddev", c.stddev}});
    arr.push_back({{"variant", rows[r]}, {"cells", cols}});
  }
  return nlohmann::json{{"metric", metric}, {"shots", shots}, {"rows", arr}}.dump(2) + "\n";
}

std::string AblationTable::to_text() const {
  std::ostringstream ss;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-30s", metric.c_str());
  ss << buf;
  for (std::size_t k : shots) {
    std::snprintf(buf, sizeof buf, " %16s", (std::to_string(k) + "-shot").c_str());
    ss << buf;
  }
  ss << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-30s", rows[r].c_str());
    ss << buf;
    for (const auto& c : cells[r]) {
      std::snprintf(buf, sizeof buf, "    %.3f +- %.3f", c.mean, c.stddev);
      ss << buf;
    }
    ss << '\n';
  }
  return ss.str();
}

AblationTable run_ablation_matrix(const ExperimentConfig& cfg) {
  ExperimentConfig base = cfg;
  base.method = mil::Method::kPemp;
  base.variant.clear();
  base.validate();
  const ExperimentData data = ExperimentData::load(base);

  AblationTable table;
  table.shots = cfg.ablation_shots;
  for (const auto& v : ablation_variants()) {
    table.rows.push_back(v.label);
    std::vector<AblationCell> row;
    for (std::size_t k : table.shots) {
      ExperimentConfig run = base;
      run.variant = v.name;
      run.shots = k;
      const RunResult r = train(run, data);
      if (table.metric.empty()) table.metric = r.seeds.front().metrics.primary_name();
      const Summary s = r.aggregate.at(table.metric);
      row.push_back({s.mean, s.stddev});
    }
    table.cells.push_back(std::move(row));
  }
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    io::write_text_atomic(cfg.output_dir / "ablation.csv", table.to_csv());
    io::write_text_atomic(cfg.output_dir / "ablation.json", table.to_json());
    io::write_text_atomic(cfg.output_dir / "ablation.txt", table.to_text());
    io::write_text_atomic(cfg.output_dir / "config.json", experiment_config_to_json(cfg));
  }
  return table;
}

}  // namespace promptmil::harness
