// SPDX-License-Identifier: Apache-2.0
#include "m2g2/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace m2g2 {

double GradCheckReport::worst_relative_error() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.relative_error);
  return w;
}

GradCheckReport check_gradients(ParamStore& params, const LossBuilder& build_loss,
                                double step) {
  params.zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape, params);
    tape.backward(loss);
  }

  auto scalar_loss = [&]() {
    Tape tape(GradMode::disabled);
    return build_loss(tape, params).value()(0, 0);
  };

  GradCheckReport report;
  for (auto& e : params.entries()) {
    Tensor numeric(e.value.rows(), e.value.cols());
    auto w = e.value.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + step;
      const double up = scalar_loss();
      w[i] = saved - step;
      const double down = scalar_loss();
      w[i] = saved;
      numeric.values()[i] = (up - down) / (2.0 * step);
    }
    const double diff = frobenius_norm(sub(e.grad, numeric));
    const double scale = std::max(frobenius_norm(e.grad), frobenius_norm(numeric));
    GradCheckEntry entry;
    entry.name = e.name;
    entry.relative_error = scale > 0.0 ? diff / scale : 0.0;
    entry.max_abs_error = max_abs_diff(e.grad, numeric);
    entry.analytic_norm = frobenius_norm(e.grad);
    report.entries.push_back(std::move(entry));
  }
  params.zero_grad();
  return report;
}

}  // namespace m2g2
