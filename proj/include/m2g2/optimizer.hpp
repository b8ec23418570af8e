// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "m2g2/param_store.hpp"

namespace m2g2 {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global L2 gradient-norm ceiling; 0 disables clipping.
  double clip_norm = 0.0;
};

/// One bias-corrected Adam update over every parameter in insertion order.
/// Consumes the pending gradients (zeroing them) and advances the step
/// counter. Throws ContractError when no backward pass has run since the
/// previous step.
void adam_step(ParamStore& params, const AdamConfig& config);

double gradient_norm(const ParamStore& params);

}  // namespace m2g2
