#include "crl/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "crl/errors.hpp"

namespace crl {

void apply_update(SeqModel& model, std::span<const double> grad,
                  OptimizerState& state, double learning_rate) {
  if (grad.size() != model.param_count()) {
    throw std::invalid_argument("apply_update: gradient size mismatch");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("apply_update: learning_rate must be > 0");
  }
  for (double gi : grad) {
    if (!std::isfinite(gi)) {
      throw NumericError("apply_update: non-finite gradient entry");
    }
  }

  auto params = model.params();
  if (state.kind == OptimizerKind::Sgd) {
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= learning_rate * grad[i];
    }
    return;
  }

  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace crl
