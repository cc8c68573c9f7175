// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/prompts/prompts.hpp"

#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"

namespace promptmil::prompts {

namespace {

Tensor context_matrix(std::uint64_t seed, const char* name, std::size_t m, std::size_t d) {
  Rng rng = Rng(seed).fork(encoders::fnv1a64(name));
  Tensor t(m, d);
  for (auto& x : t.data()) x = rng.normal(0.0, 0.02);
  return t;
}

const char* context_name(Group g, mil::TextBackendKind kind) {
  const bool toy = kind == mil::TextBackendKind::kToy;
  switch (g) {
    case Group::kTask:
      return toy ? mil::pname::kCtxAlpha : mil::pname::kDeltaTask;
    case Group::kSlideDescription:
      return toy ? mil::pname::kCtxBeta : mil::pname::kDeltaSlide;
    case Group::kPatchDescription:
      return toy ? mil::pname::kCtxGamma : mil::pname::kDeltaPatch;
  }
  return "";
}

}  // namespace

void PromptSpec::validate() const {
  if (classes.size() < 2) throw ValidationError("prompt spec: need >= 2 classes");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& p = classes[c];
    for (const std::string* t : {&p.task, &p.slide_description, &p.patch_description}) {
      if (t->find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ValidationError("prompt spec: class " + std::to_string(c) + " has an empty text");
      }
    }
  }
}

LearnableContexts init_contexts(std::size_t m_alpha, std::size_t m_beta, std::size_t m_gamma, std::size_t d,
                                std::uint64_t seed) {
  return {context_matrix(seed, mil::pname::kCtxAlpha, m_alpha, d),
          context_matrix(seed, mil::pname::kCtxBeta, m_beta, d),
          context_matrix(seed, mil::pname::kCtxGamma, m_gamma, d)};
}

TextBackend::TextBackend(encoders::ToyTextEncoder encoder, const PromptSpec& spec)
    : impl_(Toy{std::move(encoder), {}, {}, {}}) {
  spec.validate();
  auto& toy = std::get<Toy>(impl_);
  for (const auto& c : spec.classes) {
    toy.task.push_back(toy.encoder.embed_tokens(c.task));
    toy.slide.push_back(toy.encoder.embed_tokens(c.slide_description));
    toy.patch.push_back(toy.encoder.embed_tokens(c.patch_description));
  }
}

TextBackend::TextBackend(encoders::StaticTextFeatures features) : impl_(std::move(features)) {
  auto& f = std::get<encoders::StaticTextFeatures>(impl_);
  f.normalize_and_check();
  if (f.task.rows() < 2) throw ValidationError("static text: need >= 2 classes");
}

mil::TextBackendKind TextBackend::kind() const {
  return std::holds_alternative<Toy>(impl_) ? mil::TextBackendKind::kToy : mil::TextBackendKind::kStatic;
}

std::size_t TextBackend::num_classes() const {
  if (const auto* t = std::get_if<Toy>(&impl_)) return t->task.size();
  return std::get<encoders::StaticTextFeatures>(impl_).task.rows();
}

std::size_t TextBackend::dim() const {
  if (const auto* t = std::get_if<Toy>(&impl_)) return t->encoder.dim();
  return std::get<encoders::StaticTextFeatures>(impl_).task.cols();
}

std::string TextBackend::digest() const {
  if (const auto* t = std::get_if<Toy>(&impl_)) return t->encoder.digest();
  return std::get<encoders::StaticTextFeatures>(impl_).digest();
}

Var TextBackend::encode_group(Graph& graph, Group group, std::optional<Var> context) const {
  std::vector<Var> rows;
  if (const auto* t = std::get_if<Toy>(&impl_)) {
    const auto& tokens = group == Group::kTask ? t->task : group == Group::kSlideDescription ? t->slide : t->patch;
    for (const auto& tk : tokens) rows.push_back(t->encoder.encode(graph, context, tk));
  } else {
    const auto& f = std::get<encoders::StaticTextFeatures>(impl_);
    const Tensor& base =
        group == Group::kTask ? f.task : group == Group::kSlideDescription ? f.slide_description : f.patch_description;
    const Var delta = context ? *context : graph.constant(Tensor(1, base.cols()));
    for (std::size_t c = 0; c < base.rows(); ++c) {
      rows.push_back(encoders::encode_text_static(graph, base.row_copy(c), delta));
    }
  }
  return ad::concat_rows(rows);
}

TextFeatures build_text_features(Graph& graph, const BoundParams& params, const TextBackend& backend) {
  const auto ctx = [&](Group g) -> std::optional<Var> {
    const char* name = context_name(g, backend.kind());
    if (params.contains(name)) return params[name];
    return std::nullopt;
  };
  return {backend.encode_group(graph, Group::kTask, ctx(Group::kTask)),
          backend.encode_group(graph, Group::kSlideDescription, ctx(Group::kSlideDescription)),
          backend.encode_group(graph, Group::kPatchDescription, ctx(Group::kPatchDescription))};
}

TextFeatures build_reference_text_features(Graph& graph, const TextBackend& backend) {
  const auto constant = [&](Group g) { return graph.constant(backend.encode_group(graph, g, std::nullopt).value()); };
  return {constant(Group::kTask), constant(Group::kSlideDescription), constant(Group::kPatchDescription)};
}

TextBackend make_backend(const io::Manifest& manifest, const mil::ModelSpec& spec, std::uint64_t toy_seed) {
  if (spec.backend == mil::TextBackendKind::kStatic) {
    if (!manifest.static_text) {
      throw ValidationError("text backend 'static' needs a static_text section in the manifest");
    }
    TextBackend b(encoders::load_static_text(manifest));
    if (b.num_classes() != manifest.num_classes()) {
      throw ValidationError("static text has " + std::to_string(b.num_classes()) + " classes, manifest has " +
                            std::to_string(manifest.num_classes()));
    }
    if (b.dim() != spec.dims.d) throw ValidationError("static text dim does not match model d");
    return b;
  }
  PromptSpec ps{manifest.prompts, spec.dims.m_alpha, spec.dims.m_beta, spec.dims.m_gamma};
  if (ps.num_classes() != manifest.num_classes()) {
    throw ValidationError("manifest has " + std::to_string(ps.num_classes()) + " prompt triples for " +
                          std::to_string(manifest.num_classes()) + " classes");
  }
  return TextBackend(encoders::ToyTextEncoder(spec.dims.d, toy_seed), ps);
}

}  // namespace promptmil::prompts
