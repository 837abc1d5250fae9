#include "crl/crl_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crl/errors.hpp"

namespace crl {

double f_score(std::span<const double> token_log_probs, double alpha) {
  if (token_log_probs.empty()) {
    throw DataError("f_score: empty log-probability list");
  }
  if (alpha < 0.0) throw DataError("f_score: alpha must be >= 0");
  double total = 0.0;
  for (double lp : token_log_probs) total += lp;
  const double denom =
      std::pow(static_cast<double>(token_log_probs.size()), alpha);
  return total / denom;
}

RankedCandidateSet rank_candidates(std::vector<Candidate> candidates,
                                   MetricKind metric,
                                   const std::string& example_id) {
  if (candidates.empty()) {
    throw DataError("rank_candidates: empty candidate list");
  }

  std::vector<Candidate> unique;
  unique.reserve(candidates.size());
  std::set<TokenSeq> seen;
  for (auto& cand : candidates) {
    if (seen.insert(cand.tokens).second) unique.push_back(std::move(cand));
  }

  for (const auto& cand : unique) {
    if (!cand.metric_scores.count(metric)) {
      throw DataError("rank_candidates: candidate missing score for metric " +
                      to_string(metric));
    }
  }

  std::vector<std::size_t> order(unique.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return unique[a].metric_scores.at(metric) >
                            unique[b].metric_scores.at(metric);
                   });

  RankedCandidateSet ranked;
  ranked.example_id = example_id;
  ranked.metric = metric;
  ranked.candidates.reserve(unique.size());
  for (std::size_t idx : order) {
    ranked.candidates.push_back(std::move(unique[idx]));
  }
  return ranked;
}

double contrastive_loss(std::span<const double> f_by_rank, double lambda) {
  if (lambda < 0.0) throw DataError("contrastive_loss: lambda must be >= 0");
  const std::size_t n = f_by_rank.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double margin = static_cast<double>(j - i) * lambda;
      const double hinge = f_by_rank[j] - f_by_rank[i] + margin;
      if (hinge > 0.0) loss += hinge;
    }
  }
  return loss;
}

double contrastive_loss(const RankedCandidateSet& ranked, double lambda) {
  std::vector<double> f;
  f.reserve(ranked.candidates.size());
  for (const auto& cand : ranked.candidates) f.push_back(cand.f_score);
  return contrastive_loss(f, lambda);
}

LossBreakdown combined_loss(double mle, double ctr, double gamma) {
  if (!std::isfinite(mle) || !std::isfinite(ctr) || !std::isfinite(gamma)) {
    throw NumericError("combined_loss: non-finite input");
  }
  LossBreakdown out;
  out.mle = mle;
  out.ctr = ctr;
  out.combined = mle + gamma * ctr;
  return out;
}

}  // namespace crl
