// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "promptmil/autodiff/params.hpp"
#include "promptmil/mil/example_bank.hpp"
#include "promptmil/mil/layers.hpp"

namespace promptmil::mil {

enum class Method { kPemp, kLinearProbe, kVpt, kCoop, kKgCoop };
enum class TextBackendKind { kStatic, kToy };

/// What the example-alignment terms (slide and patch AC-losses) compare.
enum class ExampleAlignment {
  kDescriptive,     // example features vs descriptive text features
  kTaskText,        // example features vs task text features
  kTrainingSlides,  // training slides vs descriptive text (no visual examples)
  kNone,
};

const char* method_name(Method m);
Method parse_method(const std::string& name);
const char* backend_name(TextBackendKind k);
TextBackendKind parse_backend(const std::string& name);
const char* alignment_name(ExampleAlignment a);
ExampleAlignment parse_alignment(const std::string& name);

struct ModelDims {
  std::size_t d = 64;
  std::size_t d_w = 128;  // Messenger width; must equal 2d
  std::size_t hidden = 128;
  std::size_t d_p = 64;
  std::size_t m_alpha = 8;
  std::size_t m_beta = 8;
  std::size_t m_gamma = 8;
  std::size_t top_k = 1;
  /// Messenger attention logits start near s * <x_i, x_j>: W_Q and W_K
  /// begin at sqrt(s * sqrt(d_w)) * I, W_V at I, each plus fan-in noise.
  /// 0 gives plain fan-in weights.
  double messenger_init_scale = 4.0;
  /// Multiplier on the fan-in bound of projector.W and align.W. Both feed an
  /// l2 normalization, so it only sets their relative Adam step size.
  double projector_init_gain = 5.0;

  static ModelDims for_dim(std::size_t d);
  void validate() const;
};

struct ModelFlags {
  bool patch_examples = true;
  bool slide_examples = true;
  bool slide_prompt = true;
  bool messenger = true;
  bool summary = true;
  bool text_contexts = true;
  /// false: linear classifier on the visual features, no text pathway.
  bool text_end = true;
  ExampleAlignment alignment = ExampleAlignment::kDescriptive;

  friend bool operator==(const ModelFlags&, const ModelFlags&) = default;
};

struct ModelSpec {
  ModelDims dims;
  ModelFlags flags;
  Method method = Method::kPemp;
  TextBackendKind backend = TextBackendKind::kStatic;
  std::size_t num_classes = 2;

  /// Flags actually in force: baselines override the example/prompt flags.
  ModelFlags effective_flags() const;
  bool uses_text() const { return effective_flags().text_end; }
  /// Width of the linear classifier input when the text end is off.
  std::size_t linear_input_width() const;
  std::size_t projector_input_width() const { return 2 * dims.d_w + dims.d_p; }
};

/// Parameter names.
namespace pname {
inline constexpr const char* kQuery = "messenger.query";
inline constexpr const char* kKey = "messenger.key";
inline constexpr const char* kValue = "messenger.value";
inline constexpr const char* kSummaryV = "summary.V";
inline constexpr const char* kSummaryW = "summary.w";
inline constexpr const char* kSlidePrompt = "slide.prompt";
inline constexpr const char* kProjectorW = "projector.W";
inline constexpr const char* kProjectorB = "projector.b";
inline constexpr const char* kAlignW = "align.W";
inline constexpr const char* kLogTau = "log_tau";
inline constexpr const char* kCtxAlpha = "ctx.alpha";
inline constexpr const char* kCtxBeta = "ctx.beta";
inline constexpr const char* kCtxGamma = "ctx.gamma";
inline constexpr const char* kDeltaTask = "delta.task";
inline constexpr const char* kDeltaSlide = "delta.slide";
inline constexpr const char* kDeltaPatch = "delta.patch";
inline constexpr const char* kProbeW = "probe.W";
inline constexpr const char* kProbeB = "probe.b";
inline constexpr const char* kVptPrompt = "vpt.prompt";
}  // namespace pname

inline constexpr double kMinTau = 5e-3;
inline constexpr double kMaxTau = 5.0;

/// Fresh parameters. Linear maps use U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases and static-text deltas start at zero, the slide prompt and text
/// contexts at N(0, 0.02^2), log_tau at log(tau0). Each tensor draws from its
/// own stream keyed by name, so the layout of one does not shift another.
ParamStore init_params(const ModelSpec& spec, std::uint64_t seed, double tau0);

/// Clamps log_tau into [log kMinTau, log kMaxTau].
void clamp_temperature(ParamStore& params);

/// Everything the forward pass derives from one bag.
struct BagOutput {
  PatchMatch patches;
  Var slide_feature;  // F^S, 1 x d_w
  Var attention;      // 1 x n
  /// Text head: unit F_i (1 x d). Linear head: logits (1 x U).
  Var output;
  std::optional<std::size_t> slide_match;
  double slide_cosine = 0.0;
};

/// Bag -> patch-example matching -> Messenger -> Summary -> slide head, bound
/// to one graph. Weight transposes are built once per graph.
class VisualPathway {
 public:
  VisualPathway(const BoundParams& params, const ModelSpec& spec, const ExampleBank& bank);

  /// F^S of a bag without the slide head.
  SummaryOutput aggregate(const Tensor& bag, PatchMatch* match = nullptr);

  /// Z: one F^S row per slide example, computed with the current weights
  /// (cached per pathway).
  Var example_features();
  /// Evaluation: reuse a Z computed elsewhere as a constant.
  void use_example_features(const Tensor& z);

  BagOutput forward(const Tensor& bag);

  Graph& graph() const { return params_.graph(); }
  const ModelSpec& spec() const { return spec_; }

 private:
  const BoundParams& params_;
  ModelSpec spec_;
  ModelFlags flags_;
  const ExampleBank& bank_;
  std::optional<MessengerWeights> messenger_;
  std::optional<SummaryWeights> summary_;
  std::optional<Var> projector_t_;
  std::optional<Var> probe_t_;
  std::optional<Var> z_;
};

}  // namespace promptmil::mil
