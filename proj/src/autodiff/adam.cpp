// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/autodiff/adam.hpp"

#include <cmath>

#include "promptmil/common/error.hpp"

namespace promptmil {

void adam_step(ParamStore& params, const GradientMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ValidationError("adam: gradient for unknown parameter '" + name + "'");
    if (!g.same_shape(it->second)) {
      throw ShapeError("adam: gradient " + g.shape_string() + " for parameter '" + name + "' " +
                       it->second.shape_string());
    }
    if (!g.all_finite()) throw NumericError("adam: non-finite gradient for parameter '" + name + "'");
  }

  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);

  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.rows(), p.cols());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.rows(), p.cols());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace promptmil
