// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/io/synthetic.hpp"

#include <cmath>

#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::io {

using nlohmann::json;

double SyntheticConfig::prevalence_of(std::size_t c) const {
  return prevalence.size() == 1 ? prevalence[0] : prevalence.at(c);
}

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw ValidationError("synthetic: num_classes must be >= 2");
  if (dim < 4) throw ValidationError("synthetic: dim must be >= 4");
  if (prevalence.size() != 1 && prevalence.size() != num_classes) {
    throw ValidationError("synthetic: prevalence needs 1 or num_classes values");
  }
  for (double p : prevalence) {
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("synthetic: prevalence must lie in (0, 1]");
  }
  if (!(example_prevalence > 0.0 && example_prevalence <= 1.0)) {
    throw ValidationError("synthetic: example_prevalence must lie in (0, 1]");
  }
  if (min_patches == 0 || max_patches < min_patches) throw ValidationError("synthetic: bad patch-count range");
  if (noise < 0.0 || bank_noise < 0.0 || text_noise < 0.0) throw ValidationError("synthetic: noise must be >= 0");
  if (prototypes_per_class == 0 || background_patterns == 0) {
    throw ValidationError("synthetic: need at least one prototype and one background pattern");
  }
  if (!(shared_key_component >= 0.0 && shared_key_component < 1.0)) {
    throw ValidationError("synthetic: shared_key_component must lie in [0, 1)");
  }
  if (background_per_bag > background_patterns) {
    throw ValidationError("synthetic: background_per_bag exceeds background_patterns");
  }
  if (patch_examples_per_class == 0 || slide_examples_per_class == 0) {
    throw ValidationError("synthetic: each class needs at least one patch and one slide example");
  }
  if (test_per_class == 0) throw ValidationError("synthetic: test_per_class must be positive");
  if (censoring_rate < 0.0 || censoring_rate >= 1.0) throw ValidationError("synthetic: censoring_rate must lie in [0, 1)");
}

SyntheticConfig synthetic_config_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("synthetic config: invalid JSON: ") + e.what());
  }
  if (doc.contains("synthetic")) doc = doc["synthetic"];
  if (!doc.is_object()) throw ValidationError("synthetic config: expected a JSON object");
  const json known = json::parse(synthetic_config_to_json(SyntheticConfig{}));
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ValidationError("synthetic config: unknown key '" + key + "'");
  }
  SyntheticConfig c;
  try {
    c.num_classes = doc.value("num_classes", c.num_classes);
    c.dim = doc.value("dim", c.dim);
    c.train_per_class = doc.value("train_per_class", c.train_per_class);
    c.test_per_class = doc.value("test_per_class", c.test_per_class);
    c.min_patches = doc.value("min_patches", c.min_patches);
    c.max_patches = doc.value("max_patches", c.max_patches);
    if (doc.contains("prevalence")) {
      c.prevalence = doc["prevalence"].is_array() ? doc["prevalence"].get<std::vector<double>>()
                                                  : std::vector<double>{doc["prevalence"].get<double>()};
    }
    c.noise = doc.value("noise", c.noise);
    c.prototypes_per_class = doc.value("prototypes_per_class", c.prototypes_per_class);
    c.background_patterns = doc.value("background_patterns", c.background_patterns);
    c.background_per_bag = doc.value("background_per_bag", c.background_per_bag);
    c.shared_key_component = doc.value("shared_key_component", c.shared_key_component);
    c.censoring_rate = doc.value("censoring_rate", c.censoring_rate);
    c.patch_examples_per_class = doc.value("patch_examples_per_class", c.patch_examples_per_class);
    c.slide_examples_per_class = doc.value("slide_examples_per_class", c.slide_examples_per_class);
    c.example_prevalence = doc.value("example_prevalence", c.example_prevalence);
    c.bank_noise = doc.value("bank_noise", c.bank_noise);
    c.text_noise = doc.value("text_noise", c.text_noise);
    c.survival = doc.value("survival", c.survival);
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string synthetic_config_to_json(const SyntheticConfig& c) {
  json doc{{"num_classes", c.num_classes},
           {"dim", c.dim},
           {"train_per_class", c.train_per_class},
           {"test_per_class", c.test_per_class},
           {"min_patches", c.min_patches},
           {"max_patches", c.max_patches},
           {"prevalence", c.prevalence},
           {"noise", c.noise},
           {"prototypes_per_class", c.prototypes_per_class},
           {"background_patterns", c.background_patterns},
           {"background_per_bag", c.background_per_bag},
           {"shared_key_component", c.shared_key_component},
           {"censoring_rate", c.censoring_rate},
           {"patch_examples_per_class", c.patch_examples_per_class},
           {"slide_examples_per_class", c.slide_examples_per_class},
           {"example_prevalence", c.example_prevalence},
           {"bank_noise", c.bank_noise},
           {"text_noise", c.text_noise},
           {"survival", c.survival},
           {"seed", c.seed}};
  return doc.dump(2) + "\n";
}

namespace {

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

void normalize(std::span<double> v) {
  const double n = norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

struct Patterns {
  std::vector<std::vector<std::vector<double>>> prototypes;  // [class][k][dim]
  std::vector<std::vector<double>> background;               // [j][dim]
};

struct PlantedBag {
  Bag bag;
  std::vector<std::size_t> key_patches;
};

PlantedBag sample_bag(Rng& rng, const SyntheticConfig& cfg, const Patterns& pat, std::size_t label,
                      double prevalence) {
  const std::size_t span = cfg.max_patches - cfg.min_patches + 1;
  const std::size_t n = cfg.min_patches + rng.uniform_index(span);
  PlantedBag out;
  out.bag.label = static_cast<std::uint32_t>(label);
  out.bag.features = Tensor(n, cfg.dim);
  const std::size_t kinds = cfg.background_per_bag == 0 ? cfg.background_patterns : cfg.background_per_bag;
  const auto present = sample_without_replacement(rng, cfg.background_patterns, kinds);
  for (std::size_t j = 0; j < n; ++j) {
    const bool key = rng.bernoulli(prevalence);
    const std::vector<double>* base = nullptr;
    if (key) {
      base = &pat.prototypes[label][rng.uniform_index(cfg.prototypes_per_class)];
      out.key_patches.push_back(j);
    } else {
      base = &pat.background[present[rng.uniform_index(kinds)]];
    }
    auto row = out.bag.features.row_span(j);
    for (std::size_t k = 0; k < cfg.dim; ++k) row[k] = (*base)[k] + cfg.noise * rng.normal();
  }
  if (out.key_patches.empty()) {
    // Every planted bag carries at least one key patch.
    const std::size_t j = rng.uniform_index(n);
    const auto& base = pat.prototypes[label][rng.uniform_index(cfg.prototypes_per_class)];
    auto row = out.bag.features.row_span(j);
    for (std::size_t k = 0; k < cfg.dim; ++k) row[k] = base[k] + cfg.noise * rng.normal();
    out.key_patches.push_back(j);
  }
  // Round-trip through f32 so the in-memory copy equals what read_bag returns.
  for (double& v : out.bag.features.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::vector<std::string> class_names(std::size_t u) {
  if (u == 2) return {"poor", "good"};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < u; ++c) names.push_back("class" + std::to_string(c));
  return names;
}

std::vector<ClassPrompt> default_prompts(const std::vector<std::string>& names) {
  std::vector<ClassPrompt> prompts;
  for (const auto& name : names) {
    prompts.push_back({"a whole slide image of a synthetic tumour with " + name + " outcome",
                       "slide level pattern typical of the " + name + " group",
                       "patch level pattern typical of the " + name + " group"});
  }
  return prompts;
}

}  // namespace

Manifest generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const Rng root(cfg.seed);
  Rng pattern_rng = root.fork(1);
  Rng bank_rng = root.fork(2);
  Rng example_rng = root.fork(3);
  Rng text_rng = root.fork(4);
  Rng bag_rng = root.fork(5);
  Rng survival_rng = root.fork(6);

  const std::size_t u = cfg.num_classes;
  Patterns pat;
  pat.prototypes.resize(u);
  for (std::size_t c = 0; c < u; ++c) {
    for (std::size_t k = 0; k < cfg.prototypes_per_class; ++k) {
      pat.prototypes[c].push_back(unit_vector(pattern_rng, cfg.dim));
    }
  }
  for (std::size_t j = 0; j < cfg.background_patterns; ++j) {
    pat.background.push_back(unit_vector(pattern_rng, cfg.dim));
  }
  if (cfg.shared_key_component > 0.0) {
    const auto common = unit_vector(pattern_rng, cfg.dim);
    const double a = std::sqrt(cfg.shared_key_component);
    const double b = std::sqrt(1.0 - cfg.shared_key_component);
    for (auto& protos : pat.prototypes) {
      for (auto& p : protos) {
        for (std::size_t k = 0; k < cfg.dim; ++k) p[k] = a * common[k] + b * p[k];
        normalize(p);
      }
    }
  }

  Manifest m;
  m.dataset = "synthetic-seed" + std::to_string(cfg.seed);
  m.dim = cfg.dim;
  m.task = cfg.survival ? "survival" : "classification";
  m.classes = class_names(u);
  m.prompts = default_prompts(m.classes);
  m.base_dir = out_dir;

  // Patch bank: one noisy copy per prototype, cycling, unit-normalized.
  Tensor bank(u * cfg.patch_examples_per_class, cfg.dim);
  for (std::size_t c = 0; c < u; ++c) {
    for (std::size_t i = 0; i < cfg.patch_examples_per_class; ++i) {
      const auto& proto = pat.prototypes[c][i % cfg.prototypes_per_class];
      auto row = bank.row_span(c * cfg.patch_examples_per_class + i);
      for (std::size_t k = 0; k < cfg.dim; ++k) row[k] = proto[k] + cfg.bank_noise * bank_rng.normal();
      normalize(row);
      m.patch_tags.push_back(c);
    }
  }
  m.patch_bank = "bank/patch_examples.peb1";
  write_embeddings(out_dir / m.patch_bank, bank);

  for (std::size_t c = 0; c < u; ++c) {
    for (std::size_t i = 0; i < cfg.slide_examples_per_class; ++i) {
      PlantedBag pb = sample_bag(example_rng, cfg, pat, c, cfg.example_prevalence);
      SlideExampleRef ref{"example-c" + std::to_string(c) + "-" + std::to_string(i), c, ""};
      ref.bag = "examples/" + ref.id + ".pbag";
      write_bag(out_dir / ref.bag, pb.bag);
      m.slide_examples.push_back(std::move(ref));
    }
  }

  // Static text features: normalized class prototype mean plus noise, per group.
  const char* groups[] = {"task", "slide_description", "patch_description"};
  StaticTextPaths paths;
  for (const char* group : groups) {
    Tensor feats(u, cfg.dim);
    for (std::size_t c = 0; c < u; ++c) {
      auto row = feats.row_span(c);
      for (const auto& proto : pat.prototypes[c]) {
        for (std::size_t k = 0; k < cfg.dim; ++k) row[k] += proto[k];
      }
      normalize(row);
      for (std::size_t k = 0; k < cfg.dim; ++k) row[k] += cfg.text_noise * text_rng.normal();
      normalize(row);
    }
    const std::string rel = std::string("text/") + group + ".peb1";
    write_embeddings(out_dir / rel, feats);
    if (std::string(group) == "task") paths.task = rel;
    else if (std::string(group) == "slide_description") paths.slide_description = rel;
    else paths.patch_description = rel;
  }
  m.static_text = paths;

  auto emit = [&](Split split, std::size_t per_class, const char* prefix) {
    for (std::size_t c = 0; c < u; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        PlantedBag pb = sample_bag(bag_rng, cfg, pat, c, cfg.prevalence_of(c));
        ManifestEntry e;
        e.id = std::string(prefix) + "-c" + std::to_string(c) + "-" + std::to_string(i);
        e.bag = "bags/" + e.id + ".pbag";
        e.label = c;
        e.split = split;
        e.key_patches = pb.key_patches;
        if (cfg.survival) {
          // Earlier classes carry higher risk; class order is (poor, ..., good).
          const double risk = static_cast<double>(u - 1 - c) / static_cast<double>(u - 1);
          double time = std::exp(-risk + 0.5 * survival_rng.normal());
          const bool censored = survival_rng.bernoulli(cfg.censoring_rate);
          if (censored) time *= 0.05 + 0.95 * survival_rng.uniform();
          time = static_cast<double>(static_cast<float>(time));
          pb.bag.time = time;
          pb.bag.event = !censored;
          e.time = time;
          e.event = !censored;
        }
        write_bag(out_dir / e.bag, pb.bag);
        m.entries.push_back(std::move(e));
      }
    }
  };
  emit(Split::kTrainPool, cfg.train_per_class, "train");
  emit(Split::kTest, cfg.test_per_class, "test");

  for (const auto& s : m.slide_examples) {
    const ManifestEntry* e = m.find(s.id);
    if (e != nullptr && e->split == Split::kTest) {
      throw Error("synthetic: slide example '" + s.id + "' leaked into the test split");
    }
  }
  save_manifest(m, out_dir / "manifest.json");
  write_text_atomic(out_dir / "synthetic_config.json", synthetic_config_to_json(cfg));
  return m;
}

}  // namespace promptmil::io
