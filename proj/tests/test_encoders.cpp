// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "promptmil/autodiff/grad_check.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"
#include "promptmil/encoders/feature_source.hpp"
#include "promptmil/encoders/static_text.hpp"
#include "promptmil/encoders/text_encoder.hpp"
#include "promptmil/io/binary_format.hpp"

using namespace promptmil;
using encoders::ToyTextEncoder;

namespace {

// SHA-256 of the serialized toy-encoder weights for (d=8, seed=7). Any change
// to weight generation shows up here.
constexpr const char* kToyDigest = "694db5a352cee725803fc1906f48206969d534f690fd1775951d225d343396ee";

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "promptmil-test-encoders";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<std::vector<double>> sorted_rows(const Tensor& t) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) rows.emplace_back(t.row_span(r).begin(), t.row_span(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

TEST_CASE("FNV-1a 64 reference values") {
  CHECK(encoders::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(encoders::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(encoders::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("token embedding") {
  const ToyTextEncoder enc(16, 3);
  CHECK(enc.embed_tokens("poor prognosis slide").rows() == 3);
  CHECK(enc.embed_tokens("poor  prognosis\tslide\n").rows() == 3);
  CHECK(enc.embed_tokens("same text") == enc.embed_tokens("same text"));
  const Tensor ab = enc.embed_tokens("a b");
  const Tensor ba = enc.embed_tokens("b a");
  CHECK(ab != ba);
  CHECK(sorted_rows(ab) == sorted_rows(ba));
  CHECK_THROWS_AS(enc.embed_tokens("   "), ValidationError);
  CHECK_THROWS_AS(enc.embed_tokens(""), ValidationError);
}

TEST_CASE("toy encoder weights are reproducible") {
  const ToyTextEncoder a(8, 7);
  const ToyTextEncoder b(8, 7);
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() != ToyTextEncoder(8, 8).digest());
  CHECK(a.digest() == kToyDigest);
}

TEST_CASE("encode produces unit rows and ignores position") {
  const ToyTextEncoder enc(8, 1);
  Graph g;
  const Tensor tokens = enc.embed_tokens("dense sheets of atypical cells");
  const Var a = enc.encode(g, std::nullopt, tokens);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == 8);
  CHECK(std::abs(norm(a.value().row_span(0)) - 1.0) <= 1e-12);

  const Var b = enc.encode(g, std::nullopt, enc.embed_tokens("cells atypical of sheets dense"));
  for (std::size_t i = 0; i < 8; ++i) CHECK(a.value()(0, i) == doctest::Approx(b.value()(0, i)).epsilon(1e-12));
}

TEST_CASE("gradient reaches the prefix only") {
  const ToyTextEncoder enc(8, 2);
  Rng rng(4);
  Tensor ctx(3, 8);
  for (auto& x : ctx.data()) x = rng.normal(0.0, 0.5);
  Graph g;
  const Var prefix = g.parameter("ctx", ctx);
  const Var out = enc.encode(g, prefix, enc.embed_tokens("poor prognosis slide"));
  Tensor w(1, 8);
  for (auto& x : w.data()) x = rng.normal();
  const Var root = ad::sum(ad::mul(out, g.constant(w)));
  const auto grads = g.backward(root);
  CHECK(grads.size() == 1);
  CHECK(grads.contains("ctx"));
  double total = 0.0;
  for (double v : grads.at("ctx").data()) total += std::abs(v);
  CHECK(total > 0.0);
  CHECK(grad_check(g, root, 1e-5, 1e-6).passed);

  // The prefix changes the output.
  Graph g2;
  const Var plain = enc.encode(g2, std::nullopt, enc.embed_tokens("poor prognosis slide"));
  CHECK(plain.value() != out.value());
}

TEST_CASE("encode rejects mismatched widths") {
  const ToyTextEncoder enc(8, 2);
  Graph g;
  const Var prefix = g.parameter("ctx", Tensor(2, 6));
  CHECK_THROWS_AS(enc.encode(g, prefix, enc.embed_tokens("a")), ShapeError);
}

TEST_CASE("static text backend") {
  Graph g;
  const Var zero = g.parameter("delta", Tensor(1, 2));
  const Var base_only = encoders::encode_text_static(g, Tensor::row({3.0, 4.0}), zero);
  CHECK(base_only.value()(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(base_only.value()(0, 1) == doctest::Approx(0.8).epsilon(1e-12));

  Graph g2;
  const Var delta = g2.parameter("delta", Tensor::row({0.0, 1.0}));
  const Var mixed = encoders::encode_text_static(g2, Tensor::row({1.0, 0.0}), delta);
  CHECK(mixed.value()(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(mixed.value()(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  const auto grads = g2.backward(ad::sum(mixed));
  CHECK(grads.contains("delta"));

  // Scaling a base by c > 0 leaves every cosine argmax unchanged.
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    Tensor base(3, 5), query(1, 5);
    for (auto& x : base.data()) x = rng.normal();
    for (auto& x : query.data()) x = rng.normal();
    const auto argmax = [&](double c) {
      Graph h;
      const Var d = h.parameter("delta", Tensor(1, 5));
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t r = 0; r < 3; ++r) {
        Tensor row = base.row_copy(r);
        for (auto& x : row.data()) x *= c;
        const double cs = cosine(query.row_span(0), encoders::encode_text_static(h, row, d).value().row_span(0));
        if (cs > best_cos) best_cos = cs, best = r;
      }
      return best;
    };
    CHECK(argmax(1.0) == argmax(37.5));
  }
}

TEST_CASE("static features normalize on load") {
  encoders::StaticTextFeatures f{Tensor::matrix({{3, 4}, {0, 2}}), Tensor::matrix({{1, 0}, {0, 1}}),
                                 Tensor::matrix({{1, 1}, {1, -1}})};
  f.normalize_and_check();
  for (const Tensor* t : {&f.task, &f.slide_description, &f.patch_description}) {
    for (std::size_t r = 0; r < 2; ++r) CHECK(std::abs(norm(t->row_span(r)) - 1.0) <= 1e-12);
  }
  encoders::StaticTextFeatures bad{Tensor::matrix({{0, 0}, {1, 0}}), Tensor(2, 2, 1.0), Tensor(2, 2, 1.0)};
  CHECK_THROWS_AS(bad.normalize_and_check(), ValidationError);
  encoders::StaticTextFeatures ragged{Tensor(2, 2, 1.0), Tensor(3, 2, 1.0), Tensor(2, 2, 1.0)};
  CHECK_THROWS_AS(ragged.normalize_and_check(), ShapeError);
}

TEST_CASE("patch features load bit-exactly and validate") {
  io::Bag bag;
  bag.features = Tensor::matrix({{0.5, -1.25, 3.0, 0.1}});
  for (auto& v : bag.features.data()) v = static_cast<double>(static_cast<float>(v));
  bag.label = 1;
  const auto path = scratch("one.pbag");
  io::write_bag(path, bag);
  const io::Bag back = encoders::load_patch_features(path, 4);
  CHECK(back.features == bag.features);
  CHECK_THROWS_AS(encoders::load_patch_features(path, 5), ValidationError);

  // A header that declares zero patches.
  const auto empty = scratch("empty.pbag");
  {
    std::ofstream out(empty, std::ios::binary);
    const unsigned char header[28] = {'P', 'B', 'A', 'G', 1, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(header), sizeof header);
  }
  CHECK_THROWS_AS(encoders::load_patch_features(empty, 4), FormatError);
}
