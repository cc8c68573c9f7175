// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/encoders/static_text.hpp"
#include "promptmil/encoders/text_encoder.hpp"
#include "promptmil/io/manifest.hpp"
#include "promptmil/mil/model.hpp"

namespace promptmil::prompts {

enum class Group { kTask, kSlideDescription, kPatchDescription };

/// Per-class prompt texts for the three groups plus context lengths.
struct PromptSpec {
  std::vector<io::ClassPrompt> classes;
  std::size_t m_alpha = 8;
  std::size_t m_beta = 8;
  std::size_t m_gamma = 8;

  std::size_t num_classes() const { return classes.size(); }
  /// U >= 2 and every text non-empty.
  void validate() const;
};

/// Class-shared context matrices for the three groups.
struct LearnableContexts {
  Tensor alpha;  // M_alpha x d
  Tensor beta;   // M_beta x d
  Tensor gamma;  // M_gamma x d
};

/// N(0, 0.02^2) entries. Each matrix draws from the stream of its parameter
/// name, so these equal the ctx.* tensors of init_params for the same seed.
LearnableContexts init_contexts(std::size_t m_alpha, std::size_t m_beta, std::size_t m_gamma, std::size_t d,
                                std::uint64_t seed);

/// Frozen text side: the toy encoder with pre-embedded class tokens, or the
/// precomputed static features.
class TextBackend {
 public:
  TextBackend(encoders::ToyTextEncoder encoder, const PromptSpec& spec);
  explicit TextBackend(encoders::StaticTextFeatures features);

  mil::TextBackendKind kind() const;
  std::size_t num_classes() const;
  std::size_t dim() const;
  /// Digest of everything frozen (encoder weights or static features).
  std::string digest() const;

  /// U x d unit rows for one group. `context` is the group's learnable input
  /// (toy: M x d prefix; static: 1 x d delta); nullopt means none.
  Var encode_group(Graph& graph, Group group, std::optional<Var> context) const;

 private:
  struct Toy {
    encoders::ToyTextEncoder encoder;
    std::vector<Tensor> task;
    std::vector<Tensor> slide;
    std::vector<Tensor> patch;
  };
  std::variant<Toy, encoders::StaticTextFeatures> impl_;
};

struct TextFeatures {
  Var task;
  Var slide_description;
  Var patch_description;
};

/// Row c of each matrix encodes [group context ; class-c text]. Contexts are
/// taken from `params` when present (ctx.* for toy, delta.* for static).
TextFeatures build_text_features(Graph& graph, const BoundParams& params, const TextBackend& backend);

/// Same with no learnable input at all, as constants.
TextFeatures build_reference_text_features(Graph& graph, const TextBackend& backend);

/// Backend for a manifest and model spec. Static needs the manifest's
/// static_text section; toy needs the manifest's prompt texts.
TextBackend make_backend(const io::Manifest& manifest, const mil::ModelSpec& spec, std::uint64_t toy_seed);

}  // namespace promptmil::prompts
