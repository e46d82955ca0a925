#pragma once

#include <cstdint>

#include "edd/graph.hpp"

namespace edd {

struct AdamConfig {
  scalar_t lr = 1e-3;
  scalar_t beta1 = 0.9;
  scalar_t beta2 = 0.999;
  scalar_t eps = 1e-8;
};

struct OptimizerState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  /// Zero moments shaped like `params`.
  static OptimizerState for_params(const ParameterSet& params, AdamConfig config = {});
};

/// One bias-corrected Adam update of `params` in place. Throws
/// NumericalError naming the parameter if any gradient entry is non-finite;
/// nothing is modified in that case.
void adam_step(OptimizerState& state, ParameterSet& params, const ParameterSet& grads);

/// Step-decay learning rate lambda0 * k^(-c) for step index k >= 1.
scalar_t lr_schedule(std::uint64_t step_k, scalar_t lambda0, scalar_t c);

/// Step index for a zero-based epoch when k advances once every `stride`
/// epochs (k = 1 for the first `stride` epochs).
std::uint64_t schedule_step(std::uint64_t epoch, std::uint64_t stride);

}  // namespace edd
