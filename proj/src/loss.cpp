#include "crl/loss.hpp"

#include <algorithm>
#include <cmath>

#include "crl/errors.hpp"
#include "crl/parallel.hpp"

namespace crl {
namespace {

// One teacher-forced sequence whose gradient enters the objective with a
// uniform per-token weight.
struct SeqTask {
  const TokenSeq* document = nullptr;
  const TokenSeq* target = nullptr;
  double weight = 0.0;  // filled after the forward phase
  double log_prob_sum = 0.0;
};

struct Prepared {
  std::vector<SeqTask> tasks;      // batch MLE items first, then candidates
  std::vector<std::size_t> candidate_task_begin;  // per example
  std::vector<RankedCandidateSet> ranked;         // per example (may be empty)
  std::size_t mle_tokens = 0;
  LossBreakdown loss;
};

Prepared prepare(const SeqModel& model, const LossSpec& spec) {
  if (spec.batch.empty()) throw DataError("loss: empty batch");
  if (!spec.candidate_sets.empty() &&
      spec.candidate_sets.size() != spec.batch.size()) {
    throw DataError("loss: candidate_sets must align with batch");
  }
  if (spec.crl.gamma < 0.0) throw DataError("loss: gamma must be >= 0");

  Prepared prep;
  const std::size_t n_examples = spec.batch.size();
  const bool use_ctr = spec.crl.gamma > 0.0 && !spec.candidate_sets.empty();

  for (const auto& pair : spec.batch) {
    if (pair.reference.empty()) throw DataError("loss: empty reference");
    SeqTask task;
    task.document = &pair.document;
    task.target = &pair.reference;
    prep.tasks.push_back(task);
    prep.mle_tokens += pair.reference.size();
  }

  prep.ranked.resize(n_examples);
  prep.candidate_task_begin.assign(n_examples, 0);
  if (use_ctr) {
    for (std::size_t e = 0; e < n_examples; ++e) {
      prep.candidate_task_begin[e] = prep.tasks.size();
      if (spec.candidate_sets[e].empty()) continue;
      prep.ranked[e] = rank_candidates(spec.candidate_sets[e], spec.metric,
                                       spec.batch[e].id);
      for (const auto& cand : prep.ranked[e].candidates) {
        if (cand.tokens.empty()) {
          throw DataError("loss: candidate with empty token sequence");
        }
        SeqTask task;
        task.document = &spec.batch[e].document;
        task.target = &cand.tokens;
        prep.tasks.push_back(task);
      }
    }
  }

  // Forward phase: per-sequence log-probability totals, in parallel.
  std::vector<double> sums(prep.tasks.size(), 0.0);
  par::for_index(prep.tasks.size(), [&](std::size_t t) {
    const auto logps =
        sequence_log_probs(model, *prep.tasks[t].document, *prep.tasks[t].target);
    double total = 0.0;
    for (double lp : logps) total += lp;
    sums[t] = total;
  });
  for (std::size_t t = 0; t < prep.tasks.size(); ++t) {
    prep.tasks[t].log_prob_sum = sums[t];
  }

  // MLE value and per-token weights (token-mean convention).
  double nll = 0.0;
  for (std::size_t e = 0; e < n_examples; ++e) {
    nll -= prep.tasks[e].log_prob_sum;
  }
  const double mle = nll / static_cast<double>(prep.mle_tokens);
  const double mle_token_weight = -1.0 / static_cast<double>(prep.mle_tokens);
  for (std::size_t e = 0; e < n_examples; ++e) {
    prep.tasks[e].weight = mle_token_weight;
  }

  // Contrastive values and per-candidate hinge weights.
  double ctr_total = 0.0;
  if (use_ctr) {
    for (std::size_t e = 0; e < n_examples; ++e) {
      const auto& ranked = prep.ranked[e].candidates;
      if (ranked.empty()) continue;
      const std::size_t base = prep.candidate_task_begin[e];
      std::vector<double> f(ranked.size());
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        f[i] = prep.tasks[base + i].log_prob_sum /
               std::pow(static_cast<double>(ranked[i].tokens.size()),
                        spec.crl.alpha);
      }
      ctr_total += contrastive_loss(f, spec.crl.lambda);

      // d(ctr)/df_i, scaled into a per-token weight on each candidate.
      std::vector<double> coef(ranked.size(), 0.0);
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        for (std::size_t j = i + 1; j < ranked.size(); ++j) {
          const double margin =
              static_cast<double>(j - i) * spec.crl.lambda;
          if (f[j] - f[i] + margin > 0.0) {
            coef[j] += 1.0;
            coef[i] -= 1.0;
          }
        }
      }
      const double scale =
          spec.crl.gamma / static_cast<double>(n_examples);
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        prep.tasks[base + i].weight =
            scale * coef[i] /
            std::pow(static_cast<double>(ranked[i].tokens.size()),
                     spec.crl.alpha);
      }
    }
  }
  const double ctr = ctr_total / static_cast<double>(n_examples);

  prep.loss = combined_loss(mle, ctr, spec.crl.gamma);
  return prep;
}

}  // namespace

LossBreakdown compute_loss(const SeqModel& model, const LossSpec& spec) {
  return prepare(model, spec).loss;
}

std::vector<double> loss_gradient(const SeqModel& model, const LossSpec& spec,
                                  LossBreakdown* breakdown) {
  Prepared prep = prepare(model, spec);
  if (breakdown != nullptr) *breakdown = prep.loss;
  const std::size_t n_params = model.param_count();
  const std::size_t n_tasks = prep.tasks.size();

  // Backward phase: one gradient buffer per sequence, in parallel.
  std::vector<std::vector<double>> buffers(n_tasks);
  par::for_index(n_tasks, [&](std::size_t t) {
    if (prep.tasks[t].weight == 0.0) return;
    buffers[t].assign(n_params, 0.0);
    add_sequence_grad(model, *prep.tasks[t].document, *prep.tasks[t].target,
                      prep.tasks[t].weight, buffers[t]);
  });

  // Reduce in task order within each parameter chunk; the result is
  // independent of thread count and of the parallel/serial switch.
  std::vector<double> grad(n_params, 0.0);
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (n_params + kChunk - 1) / kChunk;
  par::for_index(n_chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(n_params, lo + kChunk);
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (buffers[t].empty()) continue;
      const double* src = buffers[t].data();
      for (std::size_t i = lo; i < hi; ++i) grad[i] += src[i];
    }
  });

  for (const auto& slice : model.layout()) {
    for (std::size_t i = slice.offset; i < slice.offset + slice.size; ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericError("loss_gradient: non-finite gradient in slice \"" +
                           slice.name + "\" (training diverged)");
      }
    }
  }
  return grad;
}

}  // namespace crl
