// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include "doctest.h"
#include "promptmil/autodiff/adam.hpp"
#include "promptmil/autodiff/grad_check.hpp"
#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/params.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"

using namespace promptmil;

namespace {

Tensor gaussian(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (auto& x : t.data()) x = rng.normal();
  return t;
}

// Scalar readout with random weights, so every output coordinate matters.
Var readout(Graph& g, Var y, Rng& rng) { return ad::sum(ad::mul(y, g.constant(gaussian(rng, y.rows(), y.cols())))); }

}  // namespace

TEST_CASE("forward values of basic primitives") {
  Graph g;
  Rng rng(1);
  const Tensor x = gaussian(rng, 3, 4);
  const Var prod = ad::matmul(g.constant(Tensor::identity(3)), g.constant(x));
  CHECK(prod.value() == x);

  const Var s = ad::row_softmax(g.constant(Tensor::row({0, 0, 0})));
  for (double v : s.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Var n = ad::l2_normalize_rows(g.constant(Tensor::row({3, 4})));
  CHECK(n.value()(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n.value()(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("shape errors name the primitive") {
  Graph g;
  const Var a = g.constant(Tensor(2, 3));
  const Var b = g.constant(Tensor(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::add(a, g.constant(Tensor(3, 2))), ShapeError);
}

TEST_CASE("backward of simple roots") {
  Graph g;
  const Var x = g.parameter("x", Tensor::row({1.5, -2.0, 0.25}));
  const auto grads = g.backward(ad::sum(x));
  for (double v : grads.at("x").data()) CHECK(v == 1.0);

  Graph g2;
  const Var z = g2.parameter("z", Tensor(1, 1));
  CHECK(g2.backward(ad::sum(ad::tanh(z))).at("z")(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("backward rejects a non-scalar root") {
  Graph g;
  const Var x = g.parameter("x", Tensor(2, 2, 1.0));
  CHECK_THROWS(g.backward(x));
}

TEST_CASE("negative log softmax gradient is softmax minus one-hot") {
  Graph g;
  const std::vector<double> z{0.3, -1.2, 2.0, 0.5};
  const Var logits = g.parameter("z", Tensor::row(z));
  const std::vector<std::size_t> label{2};
  const auto grads = g.backward(ad::nll_softmax(logits, label));
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double expected = std::exp(z[i]) / denom - (i == 2 ? 1.0 : 0.0);
    CHECK(grads.at("z")(0, i) == doctest::Approx(expected).epsilon(1e-14));
  }
  CHECK(grad_check(g, g.forward(logits).empty() ? logits : ad::nll_softmax(logits, label), 1e-5, 1e-8).passed);
}

TEST_CASE("fan-out accumulates path gradients") {
  // f = sum(x * x) + sum(3 x): two uses of x in the product and a third path.
  Graph g;
  const Tensor x0 = Tensor::row({0.5, -1.0, 2.0});
  const Var x = g.parameter("x", x0);
  const Var root = ad::add(ad::sum(ad::mul(x, x)), ad::sum(ad::scale(x, 3.0)));
  const auto grads = g.backward(root);
  for (std::size_t i = 0; i < 3; ++i) CHECK(grads.at("x")(0, i) == doctest::Approx(2.0 * x0[i] + 3.0));
}

TEST_CASE("constant leaves get no gradient entry and constant graphs pass") {
  Graph g;
  const Var c = g.constant(Tensor::row({1.0, 2.0}));
  const Var p = g.parameter("p", Tensor::row({0.0, 0.0}));
  const Var root = ad::sum(c);
  const auto grads = g.backward(root);
  CHECK(grads.size() == 1);
  for (double v : grads.at("p").data()) CHECK(v == 0.0);
  CHECK(grad_check(g, root, 1e-5, 1e-12).passed);
  (void)p;
}

TEST_CASE("linear graph gradient is exact to finite differences") {
  Rng rng(3);
  Graph g;
  const Var w = g.parameter("w", gaussian(rng, 4, 3));
  const Var x = g.constant(gaussian(rng, 5, 4));
  const Var root = readout(g, ad::matmul(x, w), rng);
  const auto rep = grad_check(g, root, 1e-5, 1e-9);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error <= 1e-9);
}

TEST_CASE("every primitive passes finite differences on random shapes") {
  using Builder = std::function<Var(Graph&, Rng&, std::size_t, std::size_t)>;
  const std::vector<std::pair<const char*, Builder>> cases{
      {"matmul",
       [](Graph& g, Rng& r, std::size_t m, std::size_t n) {
         return ad::matmul(g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, n, m + 1)));
       }},
      {"add", [](Graph& g, Rng& r, std::size_t m,
                 std::size_t n) { return ad::add(g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, m, n))); }},
      {"sub", [](Graph& g, Rng& r, std::size_t m,
                 std::size_t n) { return ad::sub(g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, m, n))); }},
      {"scale", [](Graph& g, Rng& r, std::size_t m,
                   std::size_t n) { return ad::scale(g.parameter("a", gaussian(r, m, n)), -1.7); }},
      {"scale_by",
       [](Graph& g, Rng& r, std::size_t m, std::size_t n) {
         return ad::scale_by(g.parameter("a", gaussian(r, m, n)), g.parameter("s", gaussian(r, 1, 1)));
       }},
      {"concat_rows",
       [](Graph& g, Rng& r, std::size_t m, std::size_t n) {
         const std::vector<Var> parts{g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, 2, n))};
         return ad::concat_rows(parts);
       }},
      {"concat_cols",
       [](Graph& g, Rng& r, std::size_t m, std::size_t n) {
         const std::vector<Var> parts{g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, m, 3))};
         return ad::concat_cols(parts);
       }},
      {"row_softmax", [](Graph& g, Rng& r, std::size_t m,
                         std::size_t n) { return ad::row_softmax(g.parameter("a", gaussian(r, m, n))); }},
      {"tanh", [](Graph& g, Rng& r, std::size_t m, std::size_t n) { return ad::tanh(g.parameter("a", gaussian(r, m, n))); }},
      {"exp", [](Graph& g, Rng& r, std::size_t m, std::size_t n) { return ad::exp(g.parameter("a", gaussian(r, m, n))); }},
      {"l2_normalize_rows", [](Graph& g, Rng& r, std::size_t m,
                               std::size_t n) { return ad::l2_normalize_rows(g.parameter("a", gaussian(r, m, n))); }},
      {"mean_rows", [](Graph& g, Rng& r, std::size_t m,
                       std::size_t n) { return ad::mean_rows(g.parameter("a", gaussian(r, m, n))); }},
      {"transpose", [](Graph& g, Rng& r, std::size_t m,
                       std::size_t n) { return ad::transpose(g.parameter("a", gaussian(r, m, n))); }},
      {"mul", [](Graph& g, Rng& r, std::size_t m,
                 std::size_t n) { return ad::mul(g.parameter("a", gaussian(r, m, n)), g.parameter("b", gaussian(r, m, n))); }},
      {"sum", [](Graph& g, Rng& r, std::size_t m, std::size_t n) { return ad::sum(g.parameter("a", gaussian(r, m, n))); }},
      {"nll_softmax",
       [](Graph& g, Rng& r, std::size_t m, std::size_t n) {
         std::vector<std::size_t> labels(m);
         for (auto& y : labels) y = r.uniform_index(n);
         return ad::nll_softmax(g.parameter("a", gaussian(r, m, n)), labels);
       }},
  };
  Rng shapes(42);
  for (const auto& [name, build] : cases) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t m = 1 + shapes.uniform_index(5);
      const std::size_t n = 1 + shapes.uniform_index(6);
      Rng rng = shapes.fork(static_cast<std::uint64_t>(trial));
      Graph g;
      const Var y = build(g, rng, m, n);
      const Var root = y.rows() == 1 && y.cols() == 1 ? y : readout(g, y, rng);
      const auto rep = grad_check(g, root, 1e-5, 1e-5);
      INFO(name << " " << m << "x" << n << " err " << rep.max_rel_error);
      CHECK(rep.passed);
    }
  }
}

TEST_CASE("softmax and normalization invariants") {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    Graph g;
    const Tensor x = gaussian(rng, 4, 7);
    const Tensor s = ad::row_softmax(g.constant(x)).value();
    const Tensor n = ad::l2_normalize_rows(g.constant(x)).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (double v : s.row_span(r)) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
      CHECK(std::abs(norm(n.row_span(r)) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("grad_check reports non-finite perturbed values") {
  Graph g;
  const Var x = g.parameter("x", Tensor(1, 1, 709.7827));
  const Var root = ad::sum(ad::exp(x));
  const auto rep = grad_check(g, root, 1e-4, 1e-5);
  CHECK_FALSE(rep.passed);
  REQUIRE(rep.leaves.size() == 1);
  CHECK(rep.leaves[0].non_finite.size() == 1);
  CHECK(x.value()(0, 0) == 709.7827);
}

TEST_CASE("grad_check step must be in range") {
  Graph g;
  const Var x = g.parameter("x", Tensor(1, 1, 1.0));
  CHECK_THROWS(grad_check(g, ad::sum(x), 1e-3, 1e-5));
  CHECK_THROWS(grad_check(g, ad::sum(x), 1e-9, 1e-5));
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(0.5, 0.5 + 1e-7) == doctest::Approx(1e-7));
  CHECK(relative_error(100.0, 101.0) == doctest::Approx(1.0 / 101.0));
}

TEST_CASE("adam update") {
  ParamStore p{{"w", Tensor::row({1.0, -2.0})}};
  AdamState fresh;
  adam_step(p, {{"w", Tensor(1, 2)}}, fresh);
  CHECK(p.at("w") == Tensor::row({1.0, -2.0}));
  CHECK(fresh.step == 1);

  // First step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  ParamStore s{{"p", Tensor(1, 1, 1.0)}};
  AdamState st;
  st.hyper.learning_rate = 0.1;
  adam_step(s, {{"p", Tensor(1, 1, 1.0)}}, st);
  CHECK(s.at("p")(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(s.at("p")(0, 0) == doctest::Approx(0.9).epsilon(1e-7));

  // Second step by hand.
  adam_step(s, {{"p", Tensor(1, 1, 0.5)}}, st);
  const double m = 0.9 * 0.1 + 0.1 * 0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(s.at("p")(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
  CHECK(st.step == 2);
}

TEST_CASE("adam rejects non-finite gradients by name") {
  ParamStore p{{"messenger.query", Tensor(1, 2)}};
  AdamState st;
  try {
    adam_step(p, {{"messenger.query", Tensor::row({0.0, std::nan("")})}}, st);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("messenger.query") != std::string::npos);
  }
  CHECK(st.step == 0);
  CHECK_THROWS_AS(adam_step(p, {{"w", Tensor(1, 2)}}, st), Error);
}

TEST_CASE("adam is deterministic") {
  const auto run = [] {
    Rng rng(5);
    ParamStore p{{"a", gaussian(rng, 3, 3)}, {"b", gaussian(rng, 1, 4)}};
    AdamState st;
    for (int i = 0; i < 25; ++i) adam_step(p, {{"a", gaussian(rng, 3, 3)}, {"b", gaussian(rng, 1, 4)}}, st);
    return p;
  };
  CHECK(run() == run());
  CHECK(digest(run()) == digest(run()));
}

TEST_CASE("non-finite forward values raise NumericError naming the primitive") {
  Graph g;
  const Var x = g.constant(Tensor(1, 1, 1000.0));
  try {
    ad::exp(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("parameter names are unique per graph") {
  Graph g;
  g.parameter("w", Tensor(1, 1));
  CHECK_THROWS(g.parameter("w", Tensor(1, 1)));
}
