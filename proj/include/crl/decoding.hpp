#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "crl/metric_kind.hpp"
#include "crl/model.hpp"
#include "crl/types.hpp"

namespace crl {

struct BeamConfig {
  int beam_width = 8;
  int max_length = 16;
  int num_groups = 8;              // must divide beam_width
  double diversity_strength = 1.0;
  std::uint64_t seed = 0;          // recorded in manifests; search is exact
};

// One decoded summary. tokens holds the surface sequence with the end marker
// stripped; token_log_probs aligns with tokens; total_log_prob additionally
// includes the end-marker step when the sequence terminated with one.
struct Candidate {
  TokenSeq tokens;
  std::vector<double> token_log_probs;
  double total_log_prob = 0.0;
  int group = 0;
  std::map<MetricKind, double> metric_scores;
  double f_score = 0.0;
};

// Standard beam search (single group). Returns completed sequences sorted by
// model log-probability descending; a sequence completes by emitting the end
// marker or by reaching max_length. Fully deterministic.
std::vector<Candidate> beam_search(const SeqModel& model,
                                   const TokenSeq& document,
                                   const BeamConfig& config);

// Group-wise search: groups decode sequentially with per-position token
// scores penalized by diversity_strength times the count of that token at
// the same position among earlier groups' returned candidates. Selection
// uses penalized scores; reported log-probabilities are penalty-free.
std::vector<Candidate> diverse_beam_search(const SeqModel& model,
                                           const TokenSeq& document,
                                           const BeamConfig& config);

}  // namespace crl
