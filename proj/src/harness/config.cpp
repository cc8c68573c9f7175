// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/harness/ablation.hpp"

namespace promptmil::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw ValidationError("config: unknown key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config: " + where + key + ": " + e.what());
  }
}

void read(const json& obj, const char* key, std::optional<std::size_t>& out, const std::string& where) {
  std::size_t v = 0;
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  read(obj, key, v, where);
  out = v;
}

std::filesystem::path absolute_from(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw ValidationError("config: manifest is required");
  if (shots == 0) throw ValidationError("config: shots must be >= 1");
  if (seeds.empty()) throw ValidationError("config: seeds must be non-empty");
  if (epochs == 0) throw ValidationError("config: epochs must be >= 1");
  if (jobs == 0) throw ValidationError("config: jobs must be >= 1");
  if (!(optimizer.learning_rate >= 0.0) || !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.epsilon > 0.0)) {
    throw ValidationError("config: optimizer needs lr >= 0, beta1/beta2 in [0,1), eps > 0");
  }
  loss.validate();
  if (model.hidden == 0 || model.top_k == 0) throw ValidationError("config: model.hidden and model.top_k must be >= 1");
  if (!(model.messenger_init_scale >= 0.0) || !std::isfinite(model.messenger_init_scale)) {
    throw ValidationError("config: model.messenger_init_scale must be finite and >= 0");
  }
  if (!(model.projector_init_gain > 0.0) || !std::isfinite(model.projector_init_gain)) {
    throw ValidationError("config: model.projector_init_gain must be finite and > 0");
  }
  for (std::size_t k : ablation_shots) {
    if (k == 0) throw ValidationError("config: ablation_shots entries must be >= 1");
  }
  if (!variant.empty()) {
    mil::ModelFlags f;
    losses::LossConfig l;
    apply_variant(variant, f, l);
  }
  if (prompts) {
    for (const auto& p : *prompts) {
      if (p.task.empty() || p.slide_description.empty() || p.patch_description.empty()) {
        throw ValidationError("config: prompt texts must be non-empty");
      }
    }
  }
}

mil::ModelSpec ExperimentConfig::model_spec(std::size_t dim, std::size_t num_classes) const {
  mil::ModelSpec spec;
  spec.dims = mil::ModelDims::for_dim(dim);
  spec.dims.hidden = model.hidden;
  if (model.d_w) spec.dims.d_w = *model.d_w;
  if (model.d_p) spec.dims.d_p = *model.d_p;
  spec.dims.m_alpha = model.m_alpha;
  spec.dims.m_beta = model.m_beta;
  spec.dims.m_gamma = model.m_gamma;
  spec.dims.top_k = model.top_k;
  spec.dims.messenger_init_scale = model.messenger_init_scale;
  spec.dims.projector_init_gain = model.projector_init_gain;
  spec.dims.validate();
  spec.flags = flags;
  spec.method = method;
  spec.backend = text_backend;
  spec.num_classes = num_classes;
  if (!variant.empty()) {
    losses::LossConfig unused = loss;
    apply_variant(variant, spec.flags, unused);
  }
  return spec;
}

losses::LossConfig ExperimentConfig::loss_config() const {
  losses::LossConfig l = loss;
  if (!variant.empty()) {
    mil::ModelFlags unused = flags;
    apply_variant(variant, unused, l);
  }
  return l;
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  reject_unknown(j,
                 {"manifest", "shots", "seeds", "epochs", "optimizer", "loss", "model", "method", "variant",
                  "flags", "text_backend", "toy_encoder_seed", "prompts", "output_dir", "jobs", "ablation_shots"},
                 "");
  ExperimentConfig c;
  std::string manifest;
  read(j, "manifest", manifest, "");
  if (!manifest.empty()) c.manifest = absolute_from(base_dir, manifest);
  read(j, "shots", c.shots, "");
  read(j, "seeds", c.seeds, "");
  read(j, "epochs", c.epochs, "");
  read(j, "jobs", c.jobs, "");
  read(j, "ablation_shots", c.ablation_shots, "");
  read(j, "variant", c.variant, "");
  read(j, "toy_encoder_seed", c.toy_encoder_seed, "");

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, {"lr", "beta1", "beta2", "eps"}, "optimizer.");
    read(o, "lr", c.optimizer.learning_rate, "optimizer.");
    read(o, "beta1", c.optimizer.beta1, "optimizer.");
    read(o, "beta2", c.optimizer.beta2, "optimizer.");
    read(o, "eps", c.optimizer.epsilon, "optimizer.");
  }
  if (j.contains("loss")) {
    const json& o = j.at("loss");
    reject_unknown(o, {"lambda1", "lambda2", "tau0", "symmetric", "kgcoop_mu"}, "loss.");
    read(o, "lambda1", c.loss.lambda1, "loss.");
    read(o, "lambda2", c.loss.lambda2, "loss.");
    read(o, "tau0", c.loss.tau0, "loss.");
    read(o, "symmetric", c.loss.symmetric, "loss.");
    read(o, "kgcoop_mu", c.loss.kgcoop_mu, "loss.");
  }
  if (j.contains("model")) {
    const json& o = j.at("model");
    reject_unknown(o, {"hidden", "d_w", "d_p", "m_alpha", "m_beta", "m_gamma", "top_k", "messenger_init_scale",
                       "projector_init_gain"},
                    "model.");
    read(o, "hidden", c.model.hidden, "model.");
    read(o, "d_w", c.model.d_w, "model.");
    read(o, "d_p", c.model.d_p, "model.");
    read(o, "m_alpha", c.model.m_alpha, "model.");
    read(o, "m_beta", c.model.m_beta, "model.");
    read(o, "m_gamma", c.model.m_gamma, "model.");
    read(o, "top_k", c.model.top_k, "model.");
    read(o, "messenger_init_scale", c.model.messenger_init_scale, "model.");
    read(o, "projector_init_gain", c.model.projector_init_gain, "model.");
  }
  if (j.contains("flags")) {
    const json& o = j.at("flags");
    reject_unknown(o,
                   {"patch_examples", "slide_examples", "slide_prompt", "messenger", "summary", "text_contexts",
                    "text_end", "alignment"},
                   "flags.");
    read(o, "patch_examples", c.flags.patch_examples, "flags.");
    read(o, "slide_examples", c.flags.slide_examples, "flags.");
    read(o, "slide_prompt", c.flags.slide_prompt, "flags.");
    read(o, "messenger", c.flags.messenger, "flags.");
    read(o, "summary", c.flags.summary, "flags.");
    read(o, "text_contexts", c.flags.text_contexts, "flags.");
    read(o, "text_end", c.flags.text_end, "flags.");
    std::string alignment;
    read(o, "alignment", alignment, "flags.");
    if (!alignment.empty()) c.flags.alignment = mil::parse_alignment(alignment);
  }
  std::string method, backend, output;
  read(j, "method", method, "");
  if (!method.empty()) c.method = mil::parse_method(method);
  read(j, "text_backend", backend, "");
  if (!backend.empty()) c.text_backend = mil::parse_backend(backend);
  if (j.contains("prompts") && !j.at("prompts").is_null()) {
    std::vector<io::ClassPrompt> prompts;
    for (const auto& p : j.at("prompts")) {
      reject_unknown(p, {"task", "slide_description", "patch_description"}, "prompts[].");
      io::ClassPrompt cp;
      read(p, "task", cp.task, "prompts[].");
      read(p, "slide_description", cp.slide_description, "prompts[].");
      read(p, "patch_description", cp.patch_description, "prompts[].");
      prompts.push_back(std::move(cp));
    }
    c.prompts = std::move(prompts);
  }
  read(j, "output_dir", output, "");
  c.output_dir = output.empty() ? (base_dir / "runs" / mil::method_name(c.method)).lexically_normal()
                                : absolute_from(base_dir, output);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["manifest"] = c.manifest.string();
  j["shots"] = c.shots;
  j["seeds"] = c.seeds;
  j["epochs"] = c.epochs;
  j["optimizer"] = {{"lr", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.epsilon}};
  j["loss"] = {{"lambda1", c.loss.lambda1},
               {"lambda2", c.loss.lambda2},
               {"tau0", c.loss.tau0},
               {"symmetric", c.loss.symmetric},
               {"kgcoop_mu", c.loss.kgcoop_mu}};
  json m = {{"hidden", c.model.hidden},
            {"m_alpha", c.model.m_alpha},
            {"m_beta", c.model.m_beta},
            {"m_gamma", c.model.m_gamma},
            {"top_k", c.model.top_k},
            {"messenger_init_scale", c.model.messenger_init_scale},
            {"projector_init_gain", c.model.projector_init_gain}};
  if (c.model.d_w) m["d_w"] = *c.model.d_w;
  if (c.model.d_p) m["d_p"] = *c.model.d_p;
  j["model"] = m;
  j["method"] = mil::method_name(c.method);
  j["variant"] = c.variant;
  j["flags"] = {{"patch_examples", c.flags.patch_examples},
                {"slide_examples", c.flags.slide_examples},
                {"slide_prompt", c.flags.slide_prompt},
                {"messenger", c.flags.messenger},
                {"summary", c.flags.summary},
                {"text_contexts", c.flags.text_contexts},
                {"text_end", c.flags.text_end},
                {"alignment", mil::alignment_name(c.flags.alignment)}};
  j["text_backend"] = mil::backend_name(c.text_backend);
  j["toy_encoder_seed"] = c.toy_encoder_seed;
  if (c.prompts) {
    json arr = json::array();
    for (const auto& p : *c.prompts) {
      arr.push_back({{"task", p.task},
                     {"slide_description", p.slide_description},
                     {"patch_description", p.patch_description}});
    }
    j["prompts"] = arr;
  }
  j["output_dir"] = c.output_dir.string();
  j["jobs"] = c.jobs;
  j["ablation_shots"] = c.ablation_shots;
  return j.dump(2) + "\n";
}

}  // namespace promptmil::harness
