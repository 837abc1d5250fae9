#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crl/checkpoint.hpp"
#include "crl/crl_loss.hpp"
#include "crl/decoding.hpp"
#include "crl/loss.hpp"
#include "crl/model.hpp"
#include "crl/types.hpp"
#include "crl/vocab.hpp"

namespace crl {

struct TrainConfig {
  MetricKind metric = MetricKind::RougeMean;
  double learning_rate = 1e-4;
  CrlConfig crl;
  int batch_size = 4;
  int max_epochs = 20;
  int patience = 3;
  std::uint64_t seed = 1;
  int valid_beam_width = 4;
  int max_decode_length = 16;
  int dae_window = 10;
};

struct EpochLog {
  int epoch = 0;
  double mle = 0.0;
  double ctr = 0.0;
  double com = 0.0;
  double valid_score = 0.0;
};

struct TrainedSystem {
  std::string name;
  Checkpoint checkpoint;  // parameters of the best validation epoch
  TrainConfig config;
  std::vector<double> validation_history;
  int best_epoch = 0;  // 1-based index into validation_history
  std::vector<EpochLog> log;
};

using CandidateSetMap = std::map<std::string, std::vector<Candidate>>;

// Stop once the validation score has failed to improve for `patience`
// consecutive epochs. Factored out so the contract is testable in isolation.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  // Returns true when training should stop after this epoch.
  bool observe(double score);
  int best_epoch() const { return best_epoch_; }
  double best_score() const { return best_score_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  double best_score_ = 0.0;
  int since_improvement_ = 0;
};

// Maximum-likelihood training from random initialization; the desk-scale
// stand-in for a pretrained base. References are taught with a trailing end
// marker so decoding learns to stop.
SeqModel pretrain_base(const std::vector<ExamplePair>& corpus, int epochs,
                       double learning_rate, std::uint64_t seed,
                       const ModelConfig& config, int batch_size = 8);

// Decodes every document with diverse beam search, deduplicates, drops
// empty surfaces, and scores each candidate under every requested metric.
// Per-token log-probabilities are recorded under `model`.
CandidateSetMap generate_candidate_sets(const SeqModel& model,
                                        const std::vector<ExamplePair>& corpus,
                                        const BeamConfig& beam_config,
                                        const std::vector<MetricKind>& metrics,
                                        const SeqModel& scorer,
                                        const Vocabulary& vocab,
                                        int dae_window = 10);

// Fine-tunes with the combined objective against config.metric, validating
// with the same metric after each epoch (plain beam search). Returns the
// checkpoint of the best validation epoch.
TrainedSystem finetune(const SeqModel& base, const CandidateSetMap& candidates,
                       const std::vector<ExamplePair>& train_corpus,
                       const std::vector<ExamplePair>& valid_corpus,
                       const TrainConfig& config, const SeqModel& scorer,
                       const Vocabulary& vocab);

// Mean of config.metric over beam-decoded top summaries; the validation
// criterion and the per-metric column entry of test evaluation.
double score_corpus_with_metric(const SeqModel& model,
                                const std::vector<ExamplePair>& corpus,
                                MetricKind metric, int beam_width,
                                int max_length, const SeqModel& scorer,
                                const Vocabulary& vocab, int dae_window);

std::string system_name_for_metric(MetricKind metric);

}  // namespace crl
