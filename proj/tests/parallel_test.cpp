#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crl/corpus.hpp"
#include "crl/evaluator.hpp"
#include "crl/gradcheck.hpp"
#include "crl/parallel.hpp"
#include "crl/trainer.hpp"

using namespace crl;

// The OpenMP kernels and the serial reference path must agree bit for bit:
// every parallel loop stores per-index results and reduces them in index
// order.

namespace {

struct ParallelGuard {
  bool saved = par::enabled();
  ~ParallelGuard() { par::enabled() = saved; }
};

}  // namespace

TEST_CASE("loss gradient is identical on both paths") {
  ParallelGuard guard;
  const GradCheckSetup setup = make_gradcheck_setup(12, 3);
  LossSpec spec;
  spec.batch = setup.batch;
  spec.candidate_sets = setup.candidate_sets;
  spec.metric = MetricKind::RougeMean;
  spec.crl = setup.crl;

  par::enabled() = false;
  const auto serial_grad = loss_gradient(setup.model, spec);
  const auto serial_loss = compute_loss(setup.model, spec);
  par::enabled() = true;
  const auto parallel_grad = loss_gradient(setup.model, spec);
  const auto parallel_loss = compute_loss(setup.model, spec);

  CHECK(serial_grad == parallel_grad);
  CHECK(serial_loss.mle == parallel_loss.mle);
  CHECK(serial_loss.ctr == parallel_loss.ctr);
  CHECK(serial_loss.combined == parallel_loss.combined);
}

TEST_CASE("candidate generation is identical on both paths") {
  ParallelGuard guard;
  SynthConfig synth;
  synth.num_examples = 12;
  synth.facts_per_doc = 4;
  synth.vocab_size = 30;
  synth.seed = 5;
  const SynthCorpus corpus = generate_synthetic(synth);
  ModelConfig config;
  config.vocab_size = corpus.vocab.size();
  config.hidden_size = 16;
  config.context_window = 64;
  const SeqModel model = SeqModel::random(config, 4, 0.4);

  BeamConfig beam;
  beam.beam_width = 6;
  beam.num_groups = 6;
  beam.max_length = 14;
  beam.diversity_strength = 1.0;
  const std::vector<MetricKind> kinds = {MetricKind::RougeMean,
                                         MetricKind::DaeLike};

  par::enabled() = false;
  const auto serial = generate_candidate_sets(model, corpus.pairs, beam, kinds,
                                              model, corpus.vocab);
  par::enabled() = true;
  const auto parallel = generate_candidate_sets(model, corpus.pairs, beam,
                                                kinds, model, corpus.vocab);

  REQUIRE(serial.size() == parallel.size());
  for (const auto& [id, cands] : serial) {
    const auto& other = parallel.at(id);
    REQUIRE(cands.size() == other.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      CHECK(cands[i].tokens == other[i].tokens);
      CHECK(cands[i].token_log_probs == other[i].token_log_probs);
      CHECK(cands[i].total_log_prob == other[i].total_log_prob);
      CHECK(cands[i].metric_scores == other[i].metric_scores);
    }
  }
}

TEST_CASE("system evaluation is identical on both paths") {
  ParallelGuard guard;
  SynthConfig synth;
  synth.num_examples = 10;
  synth.facts_per_doc = 4;
  synth.vocab_size = 28;
  synth.seed = 6;
  const SynthCorpus corpus = generate_synthetic(synth);
  ModelConfig config;
  config.vocab_size = corpus.vocab.size();
  config.hidden_size = 16;
  config.context_window = 64;
  const SeqModel model = SeqModel::random(config, 8, 0.3);

  par::enabled() = false;
  const auto serial =
      evaluate_system("s", model, corpus.pairs, model, corpus.vocab, 4, 12, 10);
  par::enabled() = true;
  const auto parallel =
      evaluate_system("s", model, corpus.pairs, model, corpus.vocab, 4, 12, 10);

  CHECK(serial.row.r1 == parallel.row.r1);
  CHECK(serial.row.r2 == parallel.row.r2);
  CHECK(serial.row.rl == parallel.row.rl);
  CHECK(serial.row.b == parallel.row.b);
  CHECK(serial.row.d == parallel.row.d);
  CHECK(serial.hallucination == parallel.hallucination);
}

TEST_CASE("pretraining is identical on both paths") {
  ParallelGuard guard;
  SynthConfig synth;
  synth.num_examples = 16;
  synth.facts_per_doc = 3;
  synth.vocab_size = 26;
  synth.seed = 9;
  const SynthCorpus corpus = generate_synthetic(synth);
  ModelConfig config;
  config.vocab_size = corpus.vocab.size();
  config.hidden_size = 12;
  config.context_window = 64;

  par::enabled() = false;
  const SeqModel serial = pretrain_base(corpus.pairs, 2, 1e-3, 3, config, 4);
  par::enabled() = true;
  const SeqModel parallel = pretrain_base(corpus.pairs, 2, 1e-3, 3, config, 4);

  CHECK(std::vector<double>(serial.params().begin(), serial.params().end()) ==
        std::vector<double>(parallel.params().begin(),
                            parallel.params().end()));
}
