// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/encoders/static_text.hpp"

#include "promptmil/common/digest.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::encoders {

namespace {

void normalize_rows(Tensor& t, const char* group) {
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row_span(r);
    const double n = norm(row);
    if (n == 0.0) throw ValidationError(std::string("static text: zero row in group ") + group);
    for (double& v : row) v /= n;
  }
}

}  // namespace

void StaticTextFeatures::normalize_and_check() {
  if (!task.same_shape(slide_description) || !task.same_shape(patch_description)) {
    throw ShapeError("static text: groups disagree: " + task.shape_string() + ", " +
                     slide_description.shape_string() + ", " + patch_description.shape_string());
  }
  normalize_rows(task, "task");
  normalize_rows(slide_description, "slide_description");
  normalize_rows(patch_description, "patch_description");
}

std::string StaticTextFeatures::digest() const {
  Sha256 sha;
  for (const Tensor* t : {&task, &slide_description, &patch_description}) {
    sha.update_u64(t->rows());
    sha.update_u64(t->cols());
    sha.update(t->data());
  }
  return sha.hex();
}

StaticTextFeatures load_static_text(const io::Manifest& manifest) {
  if (!manifest.static_text) throw ValidationError("manifest has no static_text section");
  const auto& p = *manifest.static_text;
  StaticTextFeatures f{io::read_embeddings(manifest.resolve(p.task), manifest.dim),
                       io::read_embeddings(manifest.resolve(p.slide_description), manifest.dim),
                       io::read_embeddings(manifest.resolve(p.patch_description), manifest.dim)};
  if (f.task.rows() != manifest.num_classes()) {
    throw ValidationError("static text: " + std::to_string(f.task.rows()) + " rows for " +
                          std::to_string(manifest.num_classes()) + " classes");
  }
  f.normalize_and_check();
  return f;
}

Var encode_text_static(Graph& graph, const Tensor& base, Var delta) {
  if (base.rows() != 1 || !base.same_shape(delta.value())) {
    throw ShapeError("encode_text_static: base " + base.shape_string() + " vs delta " +
                     delta.value().shape_string());
  }
  return ad::l2_normalize_rows(ad::add(graph.constant(base), delta));
}

}  // namespace promptmil::encoders
