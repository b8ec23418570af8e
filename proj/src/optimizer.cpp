// SPDX-License-Identifier: Apache-2.0
#include "m2g2/optimizer.hpp"

#include <cmath>

#include "m2g2/errors.hpp"

namespace m2g2 {

double gradient_norm(const ParamStore& params) {
  double s = 0.0;
  for (const auto& e : params.entries())
    for (double g : e.grad.values()) s += g * g;
  return std::sqrt(s);
}

void adam_step(ParamStore& params, const AdamConfig& config) {
  if (!params.has_pending_gradients()) {
    throw ContractError("adam_step: no gradients since the last step (run backward first)");
  }
  if (!(config.lr > 0.0) || !(config.eps > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
      config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw InvalidParameter("adam_step: invalid hyperparameters");
  }

  double clip_scale = 1.0;
  if (config.clip_norm > 0.0) {
    const double norm = gradient_norm(params);
    if (norm > config.clip_norm) clip_scale = config.clip_norm / norm;
  }

  const double t = static_cast<double>(params.step() + 1);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  for (auto& e : params.entries()) {
    auto w = e.value.values();
    auto g = e.grad.values();
    auto m = e.first_moment.values();
    auto v = e.second_moment.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip_scale;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    if (!e.value.all_finite()) {
      throw NonFiniteError("adam_step: parameter '" + e.name + "' became non-finite");
    }
  }
  params.zero_grad();
  params.advance_step();
}

}  // namespace m2g2
