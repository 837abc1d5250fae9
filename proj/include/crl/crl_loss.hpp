#pragma once

#include <span>
#include <string>
#include <vector>

#include "crl/decoding.hpp"
#include "crl/metric_kind.hpp"

namespace crl {

struct CrlConfig {
  double lambda = 1.0;  // margin unit; rank gap (j - i) scales it
  double alpha = 1.0;   // length-penalty exponent in the f score
  double gamma = 100.0; // contrastive weight in the combined loss
};

// Candidates for one example, deduplicated and ordered by a metric
// (descending, ties broken by original position).
struct RankedCandidateSet {
  std::string example_id;
  MetricKind metric = MetricKind::RougeMean;
  std::vector<Candidate> candidates;
};

struct LossBreakdown {
  double mle = 0.0;
  double ctr = 0.0;
  double combined = 0.0;
};

// (sum of token log-probabilities) / length^alpha.
double f_score(std::span<const double> token_log_probs, double alpha);

// Removes exact duplicate token sequences (first occurrence kept), then
// stable-sorts by the metric's stored score, descending. Throws when a
// candidate lacks the requested metric score.
RankedCandidateSet rank_candidates(std::vector<Candidate> candidates,
                                   MetricKind metric,
                                   const std::string& example_id = {});

// Pairwise margin loss over f values listed in rank order:
// sum_{i<j} max(0, f[j] - f[i] + (j-i)*lambda).
double contrastive_loss(std::span<const double> f_by_rank, double lambda);

// Same, reading each candidate's f_score field.
double contrastive_loss(const RankedCandidateSet& ranked, double lambda);

LossBreakdown combined_loss(double mle, double ctr, double gamma);

}  // namespace crl
