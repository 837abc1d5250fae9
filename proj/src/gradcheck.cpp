#include "crl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "crl/metrics.hpp"
#include "crl/parallel.hpp"

namespace crl {

std::vector<double> finite_difference_gradient(const SeqModel& model,
                                               const LossSpec& spec,
                                               double step) {
  const std::size_t n = model.param_count();
  std::vector<double> grad(n, 0.0);
  par::for_index(n, [&](std::size_t i) {
    SeqModel plus = model;
    SeqModel minus = model;
    plus.params()[i] += step;
    minus.params()[i] -= step;
    const double up = compute_loss(plus, spec).combined;
    const double down = compute_loss(minus, spec).combined;
    grad[i] = (up - down) / (2.0 * step);
  });
  return grad;
}

GradCheckResult check_loss_gradient(const SeqModel& model,
                                    const LossSpec& spec, double step,
                                    double floor) {
  const auto analytic = loss_gradient(model, spec);
  const auto numeric = finite_difference_gradient(model, spec, step);

  GradCheckResult result;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({floor, std::abs(analytic[i]), std::abs(numeric[i])});
    const double rel = std::abs(analytic[i] - numeric[i]) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = numeric[i];
    }
  }
  for (const auto& slice : model.layout()) {
    if (result.worst_index >= slice.offset &&
        result.worst_index < slice.offset + slice.size) {
      result.worst_slice = slice.name;
    }
  }
  return result;
}

GradCheckSetup make_gradcheck_setup(int hidden_size, std::uint64_t seed) {
  GradCheckSetup setup;

  SynthConfig synth;
  synth.num_examples = 2;
  synth.facts_per_doc = 2;
  synth.vocab_size = 20;
  synth.seed = seed;
  SynthCorpus corpus = generate_synthetic(synth);
  setup.vocab = corpus.vocab;
  setup.batch = corpus.pairs;

  ModelConfig config;
  config.vocab_size = setup.vocab.size();
  config.hidden_size = hidden_size;
  config.context_window = 64;
  setup.model = SeqModel::random(config, seed + 1);

  // Three distinct candidates per example: the reference, its first fact,
  // and a corrupted copy. Real metric scores fix the ranking.
  for (const auto& pair : setup.batch) {
    std::vector<Candidate> cands;
    Candidate full;
    full.tokens = pair.reference;
    Candidate half;
    half.tokens.assign(pair.reference.begin(),
                       pair.reference.begin() +
                           static_cast<std::ptrdiff_t>(pair.reference.size() / 2));
    Candidate noisy;
    noisy.tokens =
        corrupt_summary(pair.reference, pair.document, 0.5, seed + 2, setup.vocab);
    for (Candidate* cand : {&full, &half, &noisy}) {
      cand->metric_scores[MetricKind::RougeMean] =
          evaluate_metric(MetricKind::RougeMean, cand->tokens, pair.document,
                          pair.reference, nullptr, setup.vocab)
              .value;
      cands.push_back(*cand);
    }
    setup.candidate_sets.push_back(std::move(cands));
  }

  setup.crl.gamma = 100.0;
  setup.crl.lambda = 1.0;
  setup.crl.alpha = 1.0;
  return setup;
}

}  // namespace crl
