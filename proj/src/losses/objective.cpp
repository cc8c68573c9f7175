// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/losses/objective.hpp"

#include <cmath>

#include "promptmil/common/error.hpp"
#include "promptmil/losses/ac_loss.hpp"

namespace promptmil::losses {

namespace {

bool usable_weight(double w) { return std::isfinite(w) && w >= 0.0; }

}  // namespace

void LossConfig::validate() const {
  if (!usable_weight(lambda1) || !usable_weight(lambda2) || !usable_weight(kgcoop_mu)) {
    throw ValidationError("loss config: lambda1, lambda2 and kgcoop_mu must be finite and >= 0");
  }
  if (!(tau0 >= mil::kMinTau && tau0 <= mil::kMaxTau)) {
    throw ValidationError("loss config: tau0 must lie in [0.005, 5]");
  }
}

Objective build_objective(const BoundParams& params, const mil::ModelSpec& spec, const mil::ExampleBank& bank,
                          const prompts::TextBackend* text, const Batch& batch, const LossConfig& cfg) {
  if (batch.bags.empty()) throw ValidationError("objective: empty batch");
  if (batch.bags.size() != batch.labels.size()) throw ShapeError("objective: bags and labels differ in count");
  Graph& g = params.graph();
  const mil::ModelFlags flags = spec.effective_flags();
  mil::VisualPathway pathway(params, spec, bank);

  std::vector<Var> outputs;
  std::vector<Var> slide_features;
  outputs.reserve(batch.bags.size());
  for (const Tensor* bag : batch.bags) {
    const mil::BagOutput o = pathway.forward(*bag);
    outputs.push_back(o.output);
    slide_features.push_back(o.slide_feature);
  }
  const Var stacked = ad::concat_rows(outputs);

  Objective obj;
  if (!flags.text_end) {
    obj.total = ad::nll_softmax(stacked, batch.labels);
    obj.parts.text = obj.parts.total = obj.total.value()(0, 0);
    return obj;
  }
  if (text == nullptr) throw ValidationError("objective: text backend required for this method");
  if (text->num_classes() != spec.num_classes) {
    throw ValidationError("objective: text backend has " + std::to_string(text->num_classes()) +
                          " classes, model has " + std::to_string(spec.num_classes));
  }

  const Var log_tau = params[mil::pname::kLogTau];
  const prompts::TextFeatures t = prompts::build_text_features(g, params, *text);
  const Var l_t = ac_loss(stacked, t.task, batch.labels, log_tau, cfg.symmetric);
  Var total = l_t;
  obj.parts.text = l_t.value()(0, 0);

  std::optional<Var> l_s, l_p;
  switch (flags.alignment) {
    case mil::ExampleAlignment::kDescriptive:
    case mil::ExampleAlignment::kTaskText: {
      const bool task = flags.alignment == mil::ExampleAlignment::kTaskText;
      if (flags.slide_examples && cfg.lambda1 > 0.0) {
        const auto tags = bank.slide_tags();
        const Var z = mil::align_project(pathway.example_features(), ad::transpose(params[mil::pname::kAlignW]));
        l_s = ac_loss(z, task ? t.task : t.slide_description, tags, log_tau, cfg.symmetric);
      }
      if (flags.patch_examples && cfg.lambda2 > 0.0) {
        l_p = ac_loss(g.constant(bank.patches), task ? t.task : t.patch_description, bank.patch_tags, log_tau,
                      cfg.symmetric);
      }
      break;
    }
    case mil::ExampleAlignment::kTrainingSlides: {
      if (cfg.lambda1 > 0.0) {
        const Var z = mil::align_project(ad::concat_rows(slide_features),
                                         ad::transpose(params[mil::pname::kAlignW]));
        l_s = ac_loss(z, t.slide_description, batch.labels, log_tau, cfg.symmetric);
      }
      if (cfg.lambda2 > 0.0) {
        Tensor means(batch.bags.size(), spec.dims.d);
        for (std::size_t b = 0; b < batch.bags.size(); ++b) {
          const Tensor& bag = *batch.bags[b];
          auto row = means.row_span(b);
          for (std::size_t r = 0; r < bag.rows(); ++r) {
            for (std::size_t c = 0; c < bag.cols(); ++c) row[c] += bag(r, c);
          }
          const double n = norm(row);
          if (n > 0.0) {
            for (auto& x : row) x /= n;
          }
        }
        l_p = ac_loss(g.constant(std::move(means)), t.patch_description, batch.labels, log_tau, cfg.symmetric);
      }
      break;
    }
    case mil::ExampleAlignment::kNone:
      break;
  }
  if (l_s) {
    obj.parts.slide = l_s->value()(0, 0);
    total = ad::add(total, ad::scale(*l_s, cfg.lambda1));
  }
  if (l_p) {
    obj.parts.patch = l_p->value()(0, 0);
    total = ad::add(total, ad::scale(*l_p, cfg.lambda2));
  }
  if (spec.method == mil::Method::kKgCoop && cfg.kgcoop_mu > 0.0) {
    const prompts::TextFeatures ref = prompts::build_reference_text_features(g, *text);
    const Var diff = ad::sub(t.task, ref.task);
    const Var penalty =
        ad::scale(ad::sum(ad::mul(diff, diff)), cfg.kgcoop_mu / static_cast<double>(spec.num_classes));
    obj.parts.knowledge = penalty.value()(0, 0);
    total = ad::add(total, penalty);
  }
  obj.total = total;
  obj.parts.total = total.value()(0, 0);
  return obj;
}

}  // namespace promptmil::losses
