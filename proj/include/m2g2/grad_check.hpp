// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "m2g2/autodiff.hpp"
#include "m2g2/param_store.hpp"

namespace m2g2 {

/// Per-parameter comparison of reverse-mode and central-difference gradients.
struct GradCheckEntry {
  std::string name;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||), Frobenius norms.
  double relative_error = 0.0;
  double max_abs_error = 0.0;
  double analytic_norm = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_relative_error() const;
};

/// Builds a scalar loss from the current parameter values on a fresh tape.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

/// Verifies every parameter of `params` against central finite differences
/// with the given step. Parameter values are restored afterwards; gradient
/// slots are left zeroed.
GradCheckReport check_gradients(ParamStore& params, const LossBuilder& build_loss,
                                double step = 1e-4);

}  // namespace m2g2
