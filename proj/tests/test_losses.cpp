// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracle.hpp"
#include "promptmil/autodiff/grad_check.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"
#include "promptmil/losses/ac_loss.hpp"
#include "promptmil/losses/metrics.hpp"

using namespace promptmil;
using losses::SurvivalRecord;

namespace {

// Unit 2-d vector at angle `a`.
std::vector<double> unit_at(double a) { return {std::cos(a), std::sin(a)}; }

// Feature rows and class rows placed so that cos(F_b, T_i) takes chosen values.
struct CosineSetup {
  Tensor features;
  Tensor classes;
};

CosineSetup two_class_setup(double cos0, double cos1) {
  // T_0 = e0, T_1 at angle phi; F chosen in 3-d so both cosines are exact.
  const double phi = std::numbers::pi / 2;
  Tensor t(2, 3);
  t(0, 0) = 1.0;
  t(1, 0) = std::cos(phi);
  t(1, 1) = std::sin(phi);
  const double rest = 1.0 - cos0 * cos0 - cos1 * cos1;
  REQUIRE(rest >= 0.0);
  Tensor f(1, 3);
  f(0, 0) = cos0;
  f(0, 1) = cos1;
  f(0, 2) = std::sqrt(rest);
  return {f, t};
}

double loss_value(const Tensor& f, const Tensor& t, const std::vector<std::size_t>& labels, double tau,
                  bool symmetric = false) {
  Graph g;
  const Var out = losses::ac_loss(g.constant(f), g.constant(t), labels, g.constant(Tensor(1, 1, std::log(tau))),
                                  symmetric);
  return out.value()(0, 0);
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

double brute_c_index(const std::vector<double>& risk, const std::vector<SurvivalRecord>& rec) {
  long comparable = 0;
  long conc = 0;
  long ties = 0;
  for (std::size_t i = 0; i < risk.size(); ++i) {
    for (std::size_t j = 0; j < risk.size(); ++j) {
      if (!rec[i].event || !(rec[i].time < rec[j].time)) continue;
      ++comparable;
      if (risk[i] > risk[j]) ++conc;
      if (risk[i] == risk[j]) ++ties;
    }
  }
  return (static_cast<double>(conc) + 0.5 * static_cast<double>(ties)) / static_cast<double>(comparable);
}

}  // namespace

TEST_CASE("ac_loss hand-computed values") {
  SUBCASE("equal cosines give ln U") {
    for (std::size_t u : {2u, 3u, 5u}) {
      Tensor t(u, 1, 1.0);
      Tensor f(4, 1, 1.0);
      CHECK(loss_value(f, t, {0, 1, 0, u - 1}, 0.07) == doctest::Approx(std::log(double(u))).epsilon(1e-12));
    }
    CHECK(std::abs(loss_value(Tensor(1, 1, 1.0), Tensor(2, 1, 1.0), {1}, 1.0) - 0.6931471805599453) < 1e-12);
  }
  SUBCASE("cosines (0.5, 0.1), tau 1") {
    const auto s = two_class_setup(0.5, 0.1);
    CHECK(std::abs(loss_value(s.features, s.classes, {0}, 1.0) - 0.5130152523999526) < 1e-12);
  }
  SUBCASE("aligned with the label, opposite to the rest") {
    Tensor t(2, 2);
    t(0, 0) = 1.0;
    t(1, 0) = -1.0;
    Tensor f(1, 2);
    f(0, 0) = 1.0;
    const double v = loss_value(f, t, {0}, 0.07);
    CHECK(v >= 0.0);
    CHECK(v < 1e-12);
  }
  SUBCASE("batch mean") {
    Tensor t(2, 2);
    t(0, 0) = 1.0;
    t(1, 1) = 1.0;
    Tensor f(2, 2);
    const auto a = unit_at(0.3);
    const auto b = unit_at(1.1);
    f(0, 0) = a[0];
    f(0, 1) = a[1];
    f(1, 0) = b[0];
    f(1, 1) = b[1];
    const double tau = 0.5;
    const auto nll = [&](double c_true, double c_other) {
      return -(c_true / tau) + std::log(std::exp(c_true / tau) + std::exp(c_other / tau));
    };
    const double expected = 0.5 * (nll(a[0], a[1]) + nll(b[1], b[0]));
    CHECK(loss_value(f, t, {0, 1}, tau) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("ac_loss symmetric option averages both directions") {
  Rng rng(4);
  Tensor f = oracle::random_unit_rows(rng, 5, 4);
  Tensor t = oracle::random_unit_rows(rng, 3, 4);
  const std::vector<std::size_t> labels{0, 2, 1, 1, 0};
  const double tau = 0.3;
  const double image_to_text = loss_value(f, t, labels, tau);
  // Text to image: the positive text of each row attends over every image.
  double text_to_image = 0.0;
  for (std::size_t b = 0; b < 5; ++b) {
    double denom = 0.0;
    for (std::size_t k = 0; k < 5; ++k) denom += std::exp(oracle::dot(f.row_span(k), t.row_span(labels[b])) / tau);
    text_to_image += -std::log(std::exp(oracle::dot(f.row_span(b), t.row_span(labels[b])) / tau) / denom);
  }
  text_to_image /= 5.0;
  CHECK(loss_value(f, t, labels, tau, true) ==
        doctest::Approx(0.5 * (image_to_text + text_to_image)).epsilon(1e-12));
}

TEST_CASE("ac_loss rejects bad inputs") {
  Tensor t(2, 2);
  t(0, 0) = 1.0;
  t(1, 1) = 1.0;
  Tensor f(1, 2);
  f(0, 0) = 1.0 + 2e-6;
  CHECK_THROWS_AS(loss_value(f, t, {0}, 1.0), ValidationError);
  f(0, 0) = 1.0 + 5e-7;
  CHECK_NOTHROW(loss_value(f, t, {0}, 1.0));
  f(0, 0) = 1.0;
  CHECK_THROWS_AS(loss_value(f, t, {2}, 1.0), ValidationError);
  CHECK_THROWS_AS(loss_value(f, t, {0, 1}, 1.0), ShapeError);
  CHECK_THROWS_AS(loss_value(f, Tensor(2, 3, 0.5), {0}, 1.0), ShapeError);
}

TEST_CASE("ac_loss gradients") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t u = 2 + trial % 3;
    const std::size_t b = 1 + trial % 4;
    Graph g;
    const Var f = g.parameter("f", oracle::random_matrix(rng, b, 5));
    const Var t = g.parameter("t", oracle::random_matrix(rng, u, 5));
    const Var log_tau = g.parameter("log_tau", Tensor(1, 1, std::log(0.2 + 0.1 * trial)));
    std::vector<std::size_t> labels(b);
    for (auto& l : labels) l = rng.uniform_index(u);
    const Var root = losses::ac_loss(ad::l2_normalize_rows(f), ad::l2_normalize_rows(t), labels, log_tau,
                                     trial % 2 == 1);
    const auto report = grad_check(g, root, 1e-5, 1e-6);
    CHECK(report.max_rel_error <= 1e-6);
  }
}

TEST_CASE("predict_probs") {
  SUBCASE("equal cosines are uniform") {
    const std::vector<double> f{1.0, 0.0};
    const Tensor t(4, 2, std::sqrt(0.5));
    for (double p : losses::predict_probs(f, t, 0.07)) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("cosines (0.9, -0.9) at tau 1") {
    const Tensor t = Tensor::matrix({{1, 0}, {-1, 0}});
    const std::vector<double> f{0.9, std::sqrt(1 - 0.81)};
    const auto p = losses::predict_probs(f, t, 1.0);
    CHECK(std::abs(p[0] - 0.8581489350995122) < 1e-12);
    CHECK(std::abs(p[1] - 0.1418510649004878) < 1e-12);
  }
  SUBCASE("argmax is invariant to tau and to positive rescaling") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor t = oracle::random_unit_rows(rng, 3, 6);
      Tensor f = oracle::random_matrix(rng, 1, 6);
      const auto argmax = [](const std::vector<double>& v) {
        return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
      };
      const std::size_t ref = argmax(losses::predict_probs(f.row_span(0), t, 0.07));
      CHECK(argmax(losses::predict_probs(f.row_span(0), t, 2.0)) == ref);
      for (auto& x : f.data()) x *= 7.5;
      CHECK(argmax(losses::predict_probs(f.row_span(0), t, 0.5)) == ref);
    }
  }
}

TEST_CASE("AUC oracles") {
  CHECK(losses::auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(losses::auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(losses::auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{0, 1, 1}) == 0.5);
  CHECK_THROWS_AS(losses::auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
  CHECK_THROWS_AS(losses::auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), ValidationError);
  CHECK_THROWS_AS(losses::auc(std::vector<double>{NAN, 0.2}, std::vector<int>{1, 0}), ValidationError);
  CHECK_THROWS_AS(losses::auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ShapeError);
}

TEST_CASE("AUC matches brute-force pair counting on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.uniform_index(8)) / 8.0;  // coarse grid forces ties
      y[i] = static_cast<int>(rng.uniform_index(2));
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(losses::auc(s, y) == brute_auc(s, y));
  }
}

TEST_CASE("AUC properties") {
  Rng rng(77);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    y[i] = static_cast<int>(i % 2);
  }
  const double base = losses::auc(s, y);
  std::vector<double> mono(s);
  for (auto& v : mono) v = std::exp(3.0 * v) + 1.0;
  CHECK(losses::auc(mono, y) == base);
  std::vector<double> neg(s);
  for (auto& v : neg) v = -v;
  CHECK(losses::auc(neg, y) == doctest::Approx(1.0 - base).epsilon(1e-15));
}

TEST_CASE("macro one-vs-rest AUC") {
  Tensor probs(6, 3);
  const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 2};
  for (std::size_t i = 0; i < 6; ++i) probs(i, labels[i]) = 1.0;
  CHECK(losses::macro_auc_ovr(probs, labels) == 1.0);
  Rng rng(3);
  for (auto& v : probs.data()) v = rng.uniform();
  double expected = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> s(6);
    std::vector<int> y(6);
    for (std::size_t i = 0; i < 6; ++i) {
      s[i] = probs(i, c);
      y[i] = labels[i] == c;
    }
    expected += brute_auc(s, y) / 3.0;
  }
  CHECK(losses::macro_auc_ovr(probs, labels) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("C-index oracles") {
  const std::vector<SurvivalRecord> rec{{2, true}, {4, true}, {6, false}};
  CHECK(losses::c_index(std::vector<double>{0.9, 0.2, 0.5}, rec) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(losses::c_index(std::vector<double>{3, 2, 1}, rec) == 1.0);
  CHECK(losses::c_index(std::vector<double>{1, 1, 1}, rec) == 0.5);
  const std::vector<SurvivalRecord> censored{{2, false}, {4, false}};
  CHECK_THROWS_AS(losses::c_index(std::vector<double>{1, 2}, censored), ValidationError);
  const std::vector<SurvivalRecord> bad_time{{0, true}, {4, false}};
  CHECK_THROWS_AS(losses::c_index(std::vector<double>{1, 2}, bad_time), ValidationError);
}

TEST_CASE("C-index matches brute-force pair counting on random instances") {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; checked < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(49);
    std::vector<double> risk(n);
    std::vector<SurvivalRecord> rec(n);
    for (std::size_t i = 0; i < n; ++i) {
      risk[i] = static_cast<double>(rng.uniform_index(6));
      rec[i].time = 1.0 + static_cast<double>(rng.uniform_index(10));
      rec[i].event = rng.bernoulli(0.6);
    }
    bool any = false;
    for (std::size_t i = 0; i < n && !any; ++i) {
      for (std::size_t j = 0; j < n && !any; ++j) any = rec[i].event && rec[i].time < rec[j].time;
    }
    if (!any) {
      CHECK_THROWS_AS(losses::c_index(risk, rec), ValidationError);
      continue;
    }
    CHECK(losses::c_index(risk, rec) == brute_c_index(risk, rec));
    ++checked;
  }
}
