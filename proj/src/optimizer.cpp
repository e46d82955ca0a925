#include "edd/optimizer.hpp"

#include <cmath>

namespace edd {

OptimizerState OptimizerState::for_params(const ParameterSet& params, AdamConfig config) {
  OptimizerState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.config = config;
  return s;
}

void adam_step(OptimizerState& state, ParameterSet& params, const ParameterSet& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.allFinite()) throw NumericalError("adam: non-finite gradient for parameter '" + name + "'");
    const matrix_t& p = params.at(name);
    if (p.rows() != g.rows() || p.cols() != g.cols() ||
        state.first_moment.at(name).rows() != g.rows() ||
        state.first_moment.at(name).cols() != g.cols())
      throw ShapeError("adam: shape mismatch for parameter '" + name + "'");
  }

  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const scalar_t bias1 = 1.0 - std::pow(c.beta1, t);
  const scalar_t bias2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& [name, g] : grads) {
    matrix_t& m = state.first_moment.at(name);
    matrix_t& v = state.second_moment.at(name);
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    params.at(name).array() -=
        c.lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.eps);
  }
}

scalar_t lr_schedule(std::uint64_t step_k, scalar_t lambda0, scalar_t c) {
  if (step_k == 0) throw InputError("lr_schedule: step index starts at 1");
  if (!(lambda0 > 0)) throw InputError("lr_schedule: lambda0 must be positive");
  return lambda0 * std::pow(static_cast<double>(step_k), -c);
}

std::uint64_t schedule_step(std::uint64_t epoch, std::uint64_t stride) {
  if (stride == 0) throw InputError("lr_schedule: stride must be positive");
  return epoch / stride + 1;
}

}  // namespace edd
