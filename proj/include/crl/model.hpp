#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crl/types.hpp"

namespace crl {

struct ModelConfig {
  int vocab_size = 0;
  int hidden_size = 64;
  int context_window = 64;
  double temperature = 1.0;
  bool operator==(const ModelConfig&) const = default;
};

// Named view into the flat parameter vector.
struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Encoder hidden states for one document, reused across decode steps.
struct EncCache {
  int length = 0;                // tokens actually encoded (<= context_window)
  std::vector<double> states;    // length x hidden, row-major
};

// Conditional sequence model: a single-layer tanh recurrent encoder over the
// document, a single-layer recurrent decoder with one dot-product attention
// step per position, and a softmax output head. Parameters live in one flat
// double vector; all math runs in double precision.
class SeqModel {
 public:
  SeqModel() = default;
  explicit SeqModel(const ModelConfig& config);

  static SeqModel zeros(const ModelConfig& config);
  static SeqModel random(const ModelConfig& config, std::uint64_t seed,
                         double scale = 0.08);

  const ModelConfig& config() const { return config_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  const std::vector<ParamSlice>& layout() const { return layout_; }
  std::size_t param_count() const { return params_.size(); }

  // Mutable view of one named slice; throws if the name is unknown.
  std::span<double> slice(const std::string& name);

  EncCache encode(const TokenSeq& document) const;

  // One decoder step: log-probabilities over the vocabulary for the token
  // following prev_token, plus the next recurrent state. prev_state has
  // hidden_size entries (use encoder state via decode_start for position 0).
  void decode_step(const EncCache& enc, std::span<const double> prev_state,
                   TokenId prev_token, std::span<double> log_probs_out,
                   std::span<double> next_state_out) const;

  // Initial decoder state (the final encoder hidden state).
  std::vector<double> decode_start(const EncCache& enc) const;

 private:
  void build_layout();

  ModelConfig config_;
  std::vector<double> params_;
  std::vector<ParamSlice> layout_;
};

enum class MleNorm { SequenceMean, TokenMean };

// Distribution over the next token after `prefix` (position 0 conditions on
// the reserved start token). Returns probabilities, not logs.
std::vector<double> next_token_dist(const SeqModel& model,
                                    const TokenSeq& document,
                                    const TokenSeq& prefix);

// Teacher-forced per-token log-probabilities of `target`; entry j is
// log p(target[j] | document, target[<j]).
std::vector<double> sequence_log_probs(const SeqModel& model,
                                       const TokenSeq& document,
                                       const TokenSeq& target);

// Negative log-likelihood of the references. SequenceMean averages the
// per-sequence totals over the batch; TokenMean divides the grand total by
// the token count (the convention used inside the combined training loss).
double mle_loss(const SeqModel& model, std::span<const ExamplePair> batch,
                MleNorm norm = MleNorm::SequenceMean);

// Accumulates weight * d(sum_t log p(target_t | doc, target_<t)))/dtheta
// into grad (which must have param_count entries).
void add_sequence_grad(const SeqModel& model, const TokenSeq& document,
                       const TokenSeq& target, double weight,
                       std::span<double> grad);

}  // namespace crl
