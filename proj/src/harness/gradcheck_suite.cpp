// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/gradcheck_suite.hpp"

#include <array>

#include "promptmil/common/rng.hpp"
#include "promptmil/harness/ablation.hpp"
#include "promptmil/losses/objective.hpp"
#include "promptmil/mil/model.hpp"
#include "promptmil/prompts/prompts.hpp"

namespace promptmil::harness {

namespace {

struct Case {
  mil::Method method;
  mil::TextBackendKind backend;
  const char* variant;
  bool symmetric;
};

constexpr std::array<Case, 14> kCases{{
    {mil::Method::kPemp, mil::TextBackendKind::kStatic, "full", false},
    {mil::Method::kPemp, mil::TextBackendKind::kToy, "full", false},
    {mil::Method::kLinearProbe, mil::TextBackendKind::kStatic, "full", false},
    {mil::Method::kVpt, mil::TextBackendKind::kStatic, "full", false},
    {mil::Method::kCoop, mil::TextBackendKind::kToy, "full", false},
    {mil::Method::kKgCoop, mil::TextBackendKind::kStatic, "full", false},
    {mil::Method::kKgCoop, mil::TextBackendKind::kToy, "full", false},
    {mil::Method::kPemp, mil::TextBackendKind::kStatic, "no-summary", false},
    {mil::Method::kPemp, mil::TextBackendKind::kToy, "no-messenger", false},
    {mil::Method::kPemp, mil::TextBackendKind::kStatic, "no-vision-examples", false},
    {mil::Method::kPemp, mil::TextBackendKind::kToy, "no-text-examples", false},
    {mil::Method::kPemp, mil::TextBackendKind::kStatic, "vision-only", false},
    {mil::Method::kPemp, mil::TextBackendKind::kToy, "full", true},
    {mil::Method::kPemp, mil::TextBackendKind::kStatic, "no-slide-prompts", true},
}};

Tensor random_rows(Rng& rng, std::size_t rows, std::size_t cols, bool unit) {
  Tensor t(rows, cols);
  for (auto& x : t.data()) x = rng.normal();
  if (unit) {
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = t.row_span(r);
      const double n = norm(row);
      for (auto& x : row) x /= n;
    }
  }
  return t;
}

}  // namespace

std::vector<GradCheckTrial> run_gradcheck_suite(std::size_t trials, double tol, double h, std::uint64_t seed) {
  std::vector<GradCheckTrial> out;
  for (std::size_t t = 0; t < trials; ++t) {
    const Case& c = kCases[t % kCases.size()];
    Rng rng = Rng(seed).fork(t);
    const std::size_t d = t % 2 == 0 ? 8 : 16;
    const std::size_t u = (t / 2) % 2 == 0 ? 2 : 3;
    const std::array<std::size_t, 2> sizes{3, 7};

    mil::ModelSpec spec;
    spec.dims = mil::ModelDims::for_dim(d);
    spec.dims.hidden = 6;
    spec.dims.m_alpha = spec.dims.m_beta = spec.dims.m_gamma = 2;
    spec.method = c.method;
    spec.backend = c.backend;
    spec.num_classes = u;
    losses::LossConfig loss;
    loss.symmetric = c.symmetric;
    loss.lambda1 = 0.7;
    loss.lambda2 = 1.3;
    loss.kgcoop_mu = 0.8;
    apply_variant(c.variant, spec.flags, loss);

    mil::ExampleBank bank;
    bank.patches = random_rows(rng, 2 * u, d, true);
    for (std::size_t i = 0; i < 2 * u; ++i) bank.patch_tags.push_back(i % u);
    for (std::size_t k = 0; k < u; ++k) {
      bank.slides.push_back({"example-" + std::to_string(k), k, random_rows(rng, sizes[(t + k) % 2], d, true)});
    }
    std::vector<Tensor> bags;
    losses::Batch batch;
    for (std::size_t b = 0; b < 2 * u; ++b) {
      bags.push_back(random_rows(rng, sizes[(t + b) % 2], d, true));
      batch.labels.push_back(b % u);
    }
    for (const auto& b : bags) batch.bags.push_back(&b);

    std::optional<prompts::TextBackend> text;
    if (c.backend == mil::TextBackendKind::kStatic) {
      text.emplace(encoders::StaticTextFeatures{random_rows(rng, u, d, true), random_rows(rng, u, d, true),
                                                random_rows(rng, u, d, true)});
    } else {
      prompts::PromptSpec ps;
      for (std::size_t k = 0; k < u; ++k) {
        const std::string tag = "grade" + std::to_string(k);
        ps.classes.push_back({"slide of " + tag + " tissue", "dense " + tag + " architecture",
                              "nuclei typical of " + tag});
      }
      text.emplace(encoders::ToyTextEncoder(d, seed + t), ps);
    }

    ParamStore params = mil::init_params(spec, seed + t, 0.3);
    for (auto& [name, value] : params) {
      for (auto& x : value.data()) x += 0.05 * rng.normal();
    }
    Graph g;
    const BoundParams bound(g, params);
    const losses::Objective obj = losses::build_objective(bound, spec, bank, &*text, batch, loss);

    GradCheckTrial trial;
    trial.description = std::string(mil::method_name(c.method)) + "/" + mil::backend_name(c.backend) + "/" +
                        c.variant + (c.symmetric ? "/symmetric" : "") + " d=" + std::to_string(d) +
                        " U=" + std::to_string(u);
    trial.report = grad_check(g, obj.total, h, tol);
    out.push_back(std::move(trial));
  }
  return out;
}

}  // namespace promptmil::harness
