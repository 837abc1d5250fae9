#include "crl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "crl/errors.hpp"
#include "crl/metrics.hpp"
#include "crl/optimizer.hpp"
#include "crl/parallel.hpp"
#include "crl/rng.hpp"

namespace crl {
namespace {

// Training targets carry the end marker so the model learns termination;
// surfaces produced at decode time have it stripped again.
ExamplePair with_eos(const ExamplePair& pair) {
  ExamplePair out = pair;
  out.reference.push_back(Vocabulary::kEos);
  return out;
}

}  // namespace

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
  if (patience < 1) throw DataError("patience must be >= 1");
}

bool EarlyStopper::observe(double score) {
  ++epochs_;
  if (epochs_ == 1 || score > best_score_) {
    best_score_ = score;
    best_epoch_ = epochs_;
    since_improvement_ = 0;
    return false;
  }
  ++since_improvement_;
  return since_improvement_ >= patience_;
}

SeqModel pretrain_base(const std::vector<ExamplePair>& corpus, int epochs,
                       double learning_rate, std::uint64_t seed,
                       const ModelConfig& config, int batch_size) {
  if (corpus.empty()) throw DataError("pretrain_base: empty corpus");
  if (batch_size < 1) throw DataError("pretrain_base: batch_size must be >= 1");

  SeqModel model = SeqModel::random(config, seed);
  if (epochs == 0) return model;

  std::vector<ExamplePair> targets;
  targets.reserve(corpus.size());
  for (const auto& pair : corpus) targets.push_back(with_eos(pair));

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  OptimizerState opt;
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      std::vector<ExamplePair> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(targets[order[k]]);
      }
      LossSpec spec;
      spec.batch = batch;
      spec.crl.gamma = 0.0;
      const auto grad = loss_gradient(model, spec);
      apply_update(model, grad, opt, learning_rate);
    }
  }
  return model;
}

CandidateSetMap generate_candidate_sets(const SeqModel& model,
                                        const std::vector<ExamplePair>& corpus,
                                        const BeamConfig& beam_config,
                                        const std::vector<MetricKind>& metrics,
                                        const SeqModel& scorer,
                                        const Vocabulary& vocab,
                                        int dae_window) {
  std::vector<std::vector<Candidate>> per_doc(corpus.size());
  par::for_index(corpus.size(), [&](std::size_t e) {
    const ExamplePair& pair = corpus[e];
    std::vector<Candidate> raw =
        diverse_beam_search(model, pair.document, beam_config);

    // Drop empty surfaces and exact duplicates, keeping first occurrences.
    std::vector<Candidate> unique;
    std::set<TokenSeq> seen;
    for (auto& cand : raw) {
      if (cand.tokens.empty()) continue;
      if (seen.insert(cand.tokens).second) unique.push_back(std::move(cand));
    }
    for (auto& cand : unique) {
      for (MetricKind kind : metrics) {
        cand.metric_scores[kind] =
            evaluate_metric(kind, cand.tokens, pair.document, pair.reference,
                            &scorer, vocab, dae_window)
                .value;
      }
      cand.f_score = f_score(cand.token_log_probs, 1.0);
    }
    per_doc[e] = std::move(unique);
  });

  CandidateSetMap out;
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    if (per_doc[e].empty()) {
      throw DataError("no nonempty candidates decoded for document " +
                      corpus[e].id);
    }
    out.emplace(corpus[e].id, std::move(per_doc[e]));
  }
  return out;
}

double score_corpus_with_metric(const SeqModel& model,
                                const std::vector<ExamplePair>& corpus,
                                MetricKind metric, int beam_width,
                                int max_length, const SeqModel& scorer,
                                const Vocabulary& vocab, int dae_window) {
  if (corpus.empty()) throw DataError("score_corpus_with_metric: empty corpus");
  BeamConfig beam;
  beam.beam_width = beam_width;
  beam.max_length = max_length;
  beam.num_groups = 1;
  beam.diversity_strength = 0.0;

  std::vector<double> scores(corpus.size(), 0.0);
  par::for_index(corpus.size(), [&](std::size_t e) {
    const ExamplePair& pair = corpus[e];
    const auto candidates = beam_search(model, pair.document, beam);
    // Highest-scoring nonempty surface; an all-empty decode counts as the
    // metric floor so a degenerate model cannot win validation.
    const Candidate* best = nullptr;
    for (const auto& cand : candidates) {
      if (!cand.tokens.empty()) {
        best = &cand;
        break;
      }
    }
    if (best == nullptr) {
      scores[e] = metric == MetricKind::BartLike ? -1e9 : 0.0;
      return;
    }
    scores[e] = evaluate_metric(metric, best->tokens, pair.document,
                                pair.reference, &scorer, vocab, dae_window)
                    .value;
  });
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(corpus.size());
}

std::string system_name_for_metric(MetricKind metric) {
  switch (metric) {
    case MetricKind::BartLike: return "CRL-COM (B)";
    case MetricKind::DaeLike: return "CRL-COM (D)";
    default: return "CRL-COM (R)";
  }
}

TrainedSystem finetune(const SeqModel& base, const CandidateSetMap& candidates,
                       const std::vector<ExamplePair>& train_corpus,
                       const std::vector<ExamplePair>& valid_corpus,
                       const TrainConfig& config, const SeqModel& scorer,
                       const Vocabulary& vocab) {
  if (train_corpus.empty()) throw DataError("finetune: empty training corpus");
  if (valid_corpus.empty()) throw DataError("finetune: empty validation corpus");
  if (config.max_epochs < 1) throw DataError("finetune: max_epochs must be >= 1");
  for (const auto& pair : train_corpus) {
    if (!candidates.count(pair.id)) {
      throw DataError("finetune: missing candidate set for example " + pair.id);
    }
  }

  std::vector<ExamplePair> targets;
  targets.reserve(train_corpus.size());
  for (const auto& pair : train_corpus) targets.push_back(with_eos(pair));

  SeqModel model = base;
  OptimizerState opt;
  Rng rng(config.seed ^ 0xda3e39cb94b95bdbULL);
  EarlyStopper stopper(config.patience);

  TrainedSystem system;
  system.name = system_name_for_metric(config.metric);
  system.config = config;

  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_mle = 0.0, epoch_ctr = 0.0, epoch_com = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<ExamplePair> batch;
      std::vector<std::vector<Candidate>> batch_cands;
      batch.reserve(stop - start);
      batch_cands.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(targets[order[k]]);
        batch_cands.push_back(candidates.at(train_corpus[order[k]].id));
      }
      LossSpec spec;
      spec.batch = batch;
      spec.candidate_sets = batch_cands;
      spec.metric = config.metric;
      spec.crl = config.crl;

      LossBreakdown loss;
      const auto grad = loss_gradient(model, spec, &loss);
      if (!std::isfinite(loss.combined)) {
        throw NumericError("finetune: training loss diverged");
      }
      apply_update(model, grad, opt, config.learning_rate);

      epoch_mle += loss.mle;
      epoch_ctr += loss.ctr;
      epoch_com += loss.combined;
      ++batches;
    }

    const double valid_score = score_corpus_with_metric(
        model, valid_corpus, config.metric, config.valid_beam_width,
        config.max_decode_length, scorer, vocab, config.dae_window);

    system.validation_history.push_back(valid_score);
    EpochLog log;
    log.epoch = epoch;
    log.mle = epoch_mle / static_cast<double>(batches);
    log.ctr = epoch_ctr / static_cast<double>(batches);
    log.com = epoch_com / static_cast<double>(batches);
    log.valid_score = valid_score;
    system.log.push_back(log);

    const bool stop = stopper.observe(valid_score);
    if (stopper.best_epoch() == epoch) {
      system.checkpoint = checkpoint_of(model, opt.step, rng.save_state());
      system.best_epoch = epoch;
    }
    if (stop) break;
  }
  return system;
}

}  // namespace crl
