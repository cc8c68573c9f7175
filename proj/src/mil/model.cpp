// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/mil/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"
#include "promptmil/encoders/text_encoder.hpp"

namespace promptmil::mil {

namespace {

constexpr std::array<std::pair<Method, const char*>, 5> kMethods{{
    {Method::kPemp, "pemp"},
    {Method::kLinearProbe, "linearprobe"},
    {Method::kVpt, "vpt"},
    {Method::kCoop, "coop"},
    {Method::kKgCoop, "kgcoop"},
}};

constexpr std::array<std::pair<ExampleAlignment, const char*>, 4> kAlignments{{
    {ExampleAlignment::kDescriptive, "descriptive"},
    {ExampleAlignment::kTaskText, "task-text"},
    {ExampleAlignment::kTrainingSlides, "training-slides"},
    {ExampleAlignment::kNone, "none"},
}};

template <typename E, std::size_t N>
E parse_enum(const std::array<std::pair<E, const char*>, N>& table, const std::string& name,
             const char* what) {
  std::string valid;
  for (const auto& [value, text] : table) {
    if (name == text) return value;
    valid += valid.empty() ? "" : ", ";
    valid += text;
  }
  throw ValidationError(std::string("unknown ") + what + " '" + name + "' (valid: " + valid + ")");
}

Tensor uniform_fan_in(Rng rng, std::size_t rows, std::size_t cols, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(cols));
  Tensor t(rows, cols);
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(Rng rng, std::size_t rows, std::size_t cols, double sd) {
  Tensor t(rows, cols);
  for (auto& x : t.data()) x = rng.normal(0.0, sd);
  return t;
}

}  // namespace

const char* method_name(Method m) {
  for (const auto& [value, text] : kMethods) {
    if (value == m) return text;
  }
  return "?";
}

Method parse_method(const std::string& name) { return parse_enum(kMethods, name, "method"); }

const char* backend_name(TextBackendKind k) { return k == TextBackendKind::kStatic ? "static" : "toy"; }

TextBackendKind parse_backend(const std::string& name) {
  if (name == "static") return TextBackendKind::kStatic;
  if (name == "toy") return TextBackendKind::kToy;
  throw ValidationError("unknown text backend '" + name + "' (valid: static, toy)");
}

const char* alignment_name(ExampleAlignment a) {
  for (const auto& [value, text] : kAlignments) {
    if (value == a) return text;
  }
  return "?";
}

ExampleAlignment parse_alignment(const std::string& name) {
  return parse_enum(kAlignments, name, "example alignment");
}

ModelDims ModelDims::for_dim(std::size_t d) {
  ModelDims dims;
  dims.d = d;
  dims.d_w = 2 * d;
  dims.d_p = d;
  return dims;
}

void ModelDims::validate() const {
  if (d == 0 || hidden == 0 || d_p == 0) throw ValidationError("model dims: d, hidden and d_p must be positive");
  if (d_w != 2 * d) {
    throw ValidationError("model dims: d_w must equal 2d (d=" + std::to_string(d) +
                          ", d_w=" + std::to_string(d_w) + ")");
  }
  if (top_k == 0) throw ValidationError("model dims: top_k must be >= 1");
  if (!(messenger_init_scale >= 0.0) || !std::isfinite(messenger_init_scale)) {
    throw ValidationError("model dims: messenger_init_scale must be finite and >= 0");
  }
  if (!(projector_init_gain > 0.0) || !std::isfinite(projector_init_gain)) {
    throw ValidationError("model dims: projector_init_gain must be finite and > 0");
  }
}

ModelFlags ModelSpec::effective_flags() const {
  ModelFlags f = flags;
  switch (method) {
    case Method::kPemp:
      break;
    case Method::kLinearProbe:
    case Method::kVpt:
      f = ModelFlags{};
      f.patch_examples = f.slide_examples = f.slide_prompt = f.text_contexts = f.text_end = false;
      f.messenger = flags.messenger;
      f.summary = flags.summary;
      f.alignment = ExampleAlignment::kNone;
      break;
    case Method::kCoop:
    case Method::kKgCoop:
      f.patch_examples = f.slide_examples = false;
      f.text_contexts = f.text_end = true;
      f.alignment = ExampleAlignment::kNone;
      break;
  }
  if (!f.text_end) f.alignment = ExampleAlignment::kNone;
  return f;
}

std::size_t ModelSpec::linear_input_width() const {
  switch (method) {
    case Method::kLinearProbe:
      return dims.d_w;
    case Method::kVpt:
      return dims.d_w + dims.d_p;
    default:
      return projector_input_width();
  }
}

ParamStore init_params(const ModelSpec& spec, std::uint64_t seed, double tau0) {
  spec.dims.validate();
  if (spec.num_classes < 2) throw ValidationError("init_params: need >= 2 classes");
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ValidationError("init_params: tau0 must be positive");
  const ModelDims& dm = spec.dims;
  const ModelFlags f = spec.effective_flags();
  const Rng root(seed);
  const auto stream = [&](const char* name) { return root.fork(encoders::fnv1a64(name)); };
  const std::size_t in = 2 * dm.d;

  ParamStore p;
  if (f.messenger) {
    p[pname::kQuery] = uniform_fan_in(stream(pname::kQuery), dm.d_w, in);
    p[pname::kKey] = uniform_fan_in(stream(pname::kKey), dm.d_w, in);
    p[pname::kValue] = uniform_fan_in(stream(pname::kValue), dm.d_w, in);
    if (dm.messenger_init_scale > 0.0) {
      const double gain = std::sqrt(dm.messenger_init_scale * std::sqrt(static_cast<double>(dm.d_w)));
      for (std::size_t i = 0; i < dm.d_w; ++i) {
        p[pname::kQuery](i, i) += gain;
        p[pname::kKey](i, i) += gain;
        p[pname::kValue](i, i) += 1.0;
      }
    }
  }
  if (f.summary) {
    p[pname::kSummaryV] = uniform_fan_in(stream(pname::kSummaryV), dm.hidden, dm.d_w);
    p[pname::kSummaryW] = uniform_fan_in(stream(pname::kSummaryW), 1, dm.hidden);
  }
  if (f.slide_prompt) p[pname::kSlidePrompt] = normal_init(stream(pname::kSlidePrompt), 1, dm.d_p, 0.02);

  if (f.text_end) {
    p[pname::kProjectorW] =
        uniform_fan_in(stream(pname::kProjectorW), dm.d, spec.projector_input_width(), dm.projector_init_gain);
    p[pname::kProjectorB] = Tensor(1, dm.d);
    const bool align_needed =
        (f.slide_examples && (f.alignment == ExampleAlignment::kDescriptive ||
                              f.alignment == ExampleAlignment::kTaskText)) ||
        f.alignment == ExampleAlignment::kTrainingSlides;
    if (align_needed) {
      p[pname::kAlignW] = uniform_fan_in(stream(pname::kAlignW), dm.d, dm.d_w, dm.projector_init_gain);
    }
    p[pname::kLogTau] = Tensor(1, 1, std::log(tau0));
    if (f.text_contexts) {
      if (spec.backend == TextBackendKind::kToy) {
        if (dm.m_alpha > 0) p[pname::kCtxAlpha] = normal_init(stream(pname::kCtxAlpha), dm.m_alpha, dm.d, 0.02);
        if (dm.m_beta > 0) p[pname::kCtxBeta] = normal_init(stream(pname::kCtxBeta), dm.m_beta, dm.d, 0.02);
        if (dm.m_gamma > 0) p[pname::kCtxGamma] = normal_init(stream(pname::kCtxGamma), dm.m_gamma, dm.d, 0.02);
      } else {
        p[pname::kDeltaTask] = Tensor(1, dm.d);
        p[pname::kDeltaSlide] = Tensor(1, dm.d);
        p[pname::kDeltaPatch] = Tensor(1, dm.d);
      }
    }
  } else {
    const std::size_t width = spec.linear_input_width();
    p[pname::kProbeW] = uniform_fan_in(stream(pname::kProbeW), spec.num_classes, width);
    p[pname::kProbeB] = Tensor(1, spec.num_classes);
    if (spec.method == Method::kVpt) p[pname::kVptPrompt] = normal_init(stream(pname::kVptPrompt), 1, dm.d_p, 0.02);
  }
  return p;
}

void clamp_temperature(ParamStore& params) {
  const auto it = params.find(pname::kLogTau);
  if (it == params.end()) return;
  double& v = it->second(0, 0);
  v = std::clamp(v, std::log(kMinTau), std::log(kMaxTau));
}

VisualPathway::VisualPathway(const BoundParams& params, const ModelSpec& spec, const ExampleBank& bank)
    : params_(params), spec_(spec), flags_(spec.effective_flags()), bank_(bank) {
  spec_.dims.validate();
  if (bank.dim() != 0 && bank.dim() != spec_.dims.d) {
    throw ShapeError("VisualPathway: bank dim " + std::to_string(bank.dim()) + " vs model d " +
                     std::to_string(spec_.dims.d));
  }
  if (flags_.messenger) {
    messenger_ = MessengerWeights{ad::transpose(params[pname::kQuery]), ad::transpose(params[pname::kKey]),
                                  ad::transpose(params[pname::kValue])};
  }
  if (flags_.summary) {
    summary_ = SummaryWeights{ad::transpose(params[pname::kSummaryV]), ad::transpose(params[pname::kSummaryW])};
  }
  if (flags_.text_end) {
    projector_t_ = ad::transpose(params[pname::kProjectorW]);
  } else {
    probe_t_ = ad::transpose(params[pname::kProbeW]);
  }
}

SummaryOutput VisualPathway::aggregate(const Tensor& bag, PatchMatch* match) {
  const std::size_t d = spec_.dims.d;
  if (bag.rows() == 0) throw ValidationError("VisualPathway: empty bag");
  if (bag.cols() != d) throw ShapeError("VisualPathway: bag " + bag.shape_string() + " vs d=" + std::to_string(d));
  PatchMatch local;
  PatchMatch& m = match ? *match : local;
  if (flags_.patch_examples) {
    m = match_patch_examples(bag, bank_.patches, spec_.dims.top_k);
  } else {
    m = PatchMatch{};
    m.augmented = Tensor(bag.rows(), 2 * d);
    for (std::size_t r = 0; r < bag.rows(); ++r) {
      const auto src = bag.row_span(r);
      std::copy(src.begin(), src.end(), m.augmented.row_span(r).begin());
    }
  }
  Graph& g = graph();
  Var x = g.constant(m.augmented);
  if (messenger_) x = messenger_forward(x, *messenger_);
  return summary_ ? summary_forward(x, *summary_) : mean_pool(x);
}

Var VisualPathway::example_features() {
  if (z_) return *z_;
  if (bank_.slides.empty()) throw ValidationError("VisualPathway: no slide examples");
  std::vector<Var> rows;
  rows.reserve(bank_.slides.size());
  for (const auto& s : bank_.slides) rows.push_back(aggregate(s.features).pooled);
  z_ = ad::concat_rows(rows);
  return *z_;
}

void VisualPathway::use_example_features(const Tensor& z) {
  if (z.cols() != spec_.dims.d_w || z.rows() != bank_.slides.size()) {
    throw ShapeError("use_example_features: got " + z.shape_string());
  }
  z_ = graph().constant(z);
}

BagOutput VisualPathway::forward(const Tensor& bag) {
  Graph& g = graph();
  const ModelDims& dm = spec_.dims;
  BagOutput out;
  const SummaryOutput s = aggregate(bag, &out.patches);
  out.slide_feature = s.pooled;
  out.attention = s.attention;

  if (!flags_.text_end && (spec_.method == Method::kLinearProbe || spec_.method == Method::kVpt)) {
    std::vector<Var> parts{s.pooled};
    if (spec_.method == Method::kVpt) parts.push_back(params_[pname::kVptPrompt]);
    const Var h = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
    out.output = ad::add(ad::matmul(h, *probe_t_), params_[pname::kProbeB]);
    return out;
  }

  Var z_match = g.constant(Tensor(1, dm.d_w));
  if (flags_.slide_examples) {
    const Var z = example_features();
    const std::size_t m = best_match(s.pooled.value().row_span(0), z.value());
    out.slide_match = m;
    out.slide_cosine = cosine(s.pooled.value().row_span(0), z.value().row_span(m));
    // Row selection as a one-hot product keeps the gradient path into Z.
    Tensor pick(1, z.rows());
    pick(0, m) = 1.0;
    z_match = ad::matmul(g.constant(std::move(pick)), z);
  }
  const Var prompt = flags_.slide_prompt ? params_[pname::kSlidePrompt] : g.constant(Tensor(1, dm.d_p));
  const std::array<Var, 3> parts{s.pooled, z_match, prompt};
  const Var h = ad::concat_cols(parts);
  if (flags_.text_end) {
    out.output = ad::l2_normalize_rows(ad::add(ad::matmul(h, *projector_t_), params_[pname::kProjectorB]));
  } else {
    out.output = ad::add(ad::matmul(h, *probe_t_), params_[pname::kProbeB]);
  }
  return out;
}

}  // namespace promptmil::mil
