#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/corpus.hpp"
#include "crl/loss.hpp"
#include "crl/model.hpp"

namespace crl {

// Central finite differences of the combined loss, one parameter at a time.
// The second route of the gradient dual-check; the analytic route lives in
// loss_gradient.
std::vector<double> finite_difference_gradient(const SeqModel& model,
                                               const LossSpec& spec,
                                               double step = 1e-4);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_slice;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Relative error |a - n| / max(floor, |a|, |n|) per parameter.
GradCheckResult check_loss_gradient(const SeqModel& model,
                                    const LossSpec& spec, double step = 1e-4,
                                    double floor = 1e-6);

// Deterministic small fixture: a random model over a tiny synthetic
// vocabulary, a 2-example batch, and 3 hand-built scored candidates per
// example.
struct GradCheckSetup {
  Vocabulary vocab;
  SeqModel model;
  std::vector<ExamplePair> batch;
  std::vector<std::vector<Candidate>> candidate_sets;
  CrlConfig crl;
};

GradCheckSetup make_gradcheck_setup(int hidden_size, std::uint64_t seed);

}  // namespace crl
