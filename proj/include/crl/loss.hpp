#pragma once

#include <span>
#include <vector>

#include "crl/crl_loss.hpp"
#include "crl/model.hpp"
#include "crl/types.hpp"

namespace crl {

// One training batch for the combined objective. candidate_sets, when
// nonempty, aligns with batch by index; metric picks the ranking order.
// The MLE term is averaged per token across the batch; the contrastive term
// is averaged per example.
struct LossSpec {
  std::span<const ExamplePair> batch;
  std::span<const std::vector<Candidate>> candidate_sets;
  MetricKind metric = MetricKind::RougeMean;
  CrlConfig crl;
};

LossBreakdown compute_loss(const SeqModel& model, const LossSpec& spec);

// Analytic d(combined)/dtheta, aligned with model.params(). Candidate f
// scores are recomputed under the live model; stored metric scores fix the
// ranking. Fills *breakdown with the loss of the same forward pass when
// non-null. Throws NumericError naming the parameter slice on non-finite
// entries.
std::vector<double> loss_gradient(const SeqModel& model, const LossSpec& spec,
                                  LossBreakdown* breakdown = nullptr);

}  // namespace crl
