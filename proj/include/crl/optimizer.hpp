#pragma once

#include <span>
#include <vector>

#include "crl/model.hpp"

namespace crl {

enum class OptimizerKind { Sgd, Adam };

// Adam moments (unused for plain gradient descent). Sized on first use.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One constant-rate update, in place. Throws NumericError on a non-finite
// gradient entry.
void apply_update(SeqModel& model, std::span<const double> grad,
                  OptimizerState& state, double learning_rate);

}  // namespace crl
