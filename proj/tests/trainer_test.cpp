#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "crl/corpus.hpp"
#include "crl/errors.hpp"
#include "crl/metrics.hpp"
#include "crl/trainer.hpp"

using namespace crl;

namespace {

struct Fixture {
  SynthCorpus corpus;
  std::vector<ExamplePair> train;
  std::vector<ExamplePair> valid;
  ModelConfig model_config;
  SeqModel base;
  CandidateSetMap candidates;

  explicit Fixture(std::uint64_t seed, int n_train = 40, int n_valid = 12,
                   int pretrain_epochs = 10) {
    SynthConfig synth;
    synth.num_examples = n_train + n_valid;
    synth.facts_per_doc = 4;
    synth.vocab_size = 36;
    synth.seed = seed;
    corpus = generate_synthetic(synth);
    train.assign(corpus.pairs.begin(), corpus.pairs.begin() + n_train);
    valid.assign(corpus.pairs.begin() + n_train, corpus.pairs.end());

    model_config.vocab_size = corpus.vocab.size();
    model_config.hidden_size = 24;
    model_config.context_window = 64;
    base = pretrain_base(train, pretrain_epochs, 3e-3, seed, model_config, 8);

    BeamConfig beam;
    beam.beam_width = 6;
    beam.num_groups = 6;
    beam.max_length = 16;
    beam.diversity_strength = 2.0;
    candidates = generate_candidate_sets(
        base, train, beam,
        {MetricKind::Rouge1, MetricKind::Rouge2, MetricKind::RougeL,
         MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike},
        base, corpus.vocab, 10);
  }
};

TrainConfig quick_config(MetricKind metric, std::uint64_t seed) {
  TrainConfig config;
  config.metric = metric;
  config.learning_rate = 3e-4;
  config.crl.gamma = 100.0;
  config.batch_size = 4;
  config.max_epochs = 3;
  config.patience = 2;
  config.seed = seed;
  config.max_decode_length = 16;
  return config;
}

}  // namespace

TEST_CASE("early stopper contract") {
  SUBCASE("patience 1: drop at epoch 2 stops after epoch 2, best is epoch 1") {
    EarlyStopper stopper(1);
    CHECK(!stopper.observe(0.6));
    CHECK(stopper.observe(0.5));
    CHECK(stopper.best_epoch() == 1);
    CHECK(stopper.best_score() == 0.6);
  }
  SUBCASE("recovery resets the counter") {
    EarlyStopper stopper(2);
    CHECK(!stopper.observe(0.5));
    CHECK(!stopper.observe(0.4));
    CHECK(!stopper.observe(0.6));
    CHECK(!stopper.observe(0.55));
    CHECK(stopper.observe(0.55));
    CHECK(stopper.best_epoch() == 3);
  }
  SUBCASE("flat scores count as no improvement") {
    EarlyStopper stopper(1);
    CHECK(!stopper.observe(0.5));
    CHECK(stopper.observe(0.5));
  }
  SUBCASE("patience must be positive") {
    CHECK_THROWS_AS(EarlyStopper(0), DataError);
  }
}

TEST_CASE("pretrain_base") {
  SynthConfig synth;
  synth.num_examples = 24;
  synth.facts_per_doc = 4;
  synth.vocab_size = 30;
  synth.seed = 2;
  const SynthCorpus corpus = generate_synthetic(synth);
  ModelConfig config;
  config.vocab_size = corpus.vocab.size();
  config.hidden_size = 16;
  config.context_window = 64;

  SUBCASE("zero epochs returns the raw initialization") {
    const SeqModel trained = pretrain_base(corpus.pairs, 0, 1e-3, 7, config);
    const SeqModel raw = SeqModel::random(config, 7);
    CHECK(std::vector<double>(trained.params().begin(), trained.params().end()) ==
          std::vector<double>(raw.params().begin(), raw.params().end()));
  }

  SUBCASE("training lowers the loss") {
    const SeqModel raw = SeqModel::random(config, 7);
    const SeqModel trained = pretrain_base(corpus.pairs, 6, 3e-3, 7, config);
    CHECK(mle_loss(trained, corpus.pairs, MleNorm::TokenMean) <
          mle_loss(raw, corpus.pairs, MleNorm::TokenMean));
  }

  SUBCASE("same seed gives identical checkpoints") {
    const SeqModel a = pretrain_base(corpus.pairs, 2, 1e-3, 11, config);
    const SeqModel b = pretrain_base(corpus.pairs, 2, 1e-3, 11, config);
    CHECK(std::vector<double>(a.params().begin(), a.params().end()) ==
          std::vector<double>(b.params().begin(), b.params().end()));
  }

  SUBCASE("empty corpus is rejected") {
    CHECK_THROWS_AS(pretrain_base({}, 1, 1e-3, 1, config), DataError);
  }
}

TEST_CASE("generate_candidate_sets contracts") {
  const Fixture fx(4, 16, 4, 6);
  CHECK(fx.candidates.size() == 16);
  for (const auto& pair : fx.train) {
    const auto& cands = fx.candidates.at(pair.id);
    CHECK(!cands.empty());
    CHECK(cands.size() <= 6);
    std::set<TokenSeq> seen;
    for (const auto& cand : cands) {
      CHECK(!cand.tokens.empty());
      CHECK(seen.insert(cand.tokens).second);  // unique
      for (MetricKind kind :
           {MetricKind::Rouge1, MetricKind::Rouge2, MetricKind::RougeL,
            MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike}) {
        CHECK(cand.metric_scores.count(kind) == 1);
      }
      CHECK(cand.token_log_probs.size() == cand.tokens.size());
    }
  }

  SUBCASE("same inputs give identical sets") {
    BeamConfig beam;
    beam.beam_width = 6;
    beam.num_groups = 6;
    beam.max_length = 16;
    beam.diversity_strength = 2.0;
    const auto again = generate_candidate_sets(
        fx.base, fx.train, beam,
        {MetricKind::Rouge1, MetricKind::Rouge2, MetricKind::RougeL,
         MetricKind::RougeMean, MetricKind::BartLike, MetricKind::DaeLike},
        fx.base, fx.corpus.vocab, 10);
    for (const auto& [id, cands] : fx.candidates) {
      const auto& other = again.at(id);
      REQUIRE(cands.size() == other.size());
      for (std::size_t i = 0; i < cands.size(); ++i) {
        CHECK(cands[i].tokens == other[i].tokens);
        CHECK(cands[i].metric_scores == other[i].metric_scores);
      }
    }
  }
}

TEST_CASE("finetune contracts") {
  const Fixture fx(1);

  SUBCASE("returned checkpoint is the argmax of the validation history") {
    const TrainedSystem system =
        finetune(fx.base, fx.candidates, fx.train, fx.valid,
                 quick_config(MetricKind::DaeLike, 1), fx.base, fx.corpus.vocab);
    REQUIRE(!system.validation_history.empty());
    const auto best = std::max_element(system.validation_history.begin(),
                                       system.validation_history.end());
    CHECK(system.best_epoch ==
          static_cast<int>(best - system.validation_history.begin()) + 1);
    CHECK(system.name == "CRL-COM (D)");
    CHECK(system.log.size() == system.validation_history.size());
  }

  SUBCASE("determinism: same config, same result") {
    const auto config = quick_config(MetricKind::RougeMean, 5);
    const TrainedSystem a = finetune(fx.base, fx.candidates, fx.train,
                                     fx.valid, config, fx.base, fx.corpus.vocab);
    const TrainedSystem b = finetune(fx.base, fx.candidates, fx.train,
                                     fx.valid, config, fx.base, fx.corpus.vocab);
    CHECK(a.checkpoint.params == b.checkpoint.params);
    CHECK(a.validation_history == b.validation_history);
  }

  SUBCASE("missing candidate set is an error") {
    CandidateSetMap incomplete = fx.candidates;
    incomplete.erase(fx.train.front().id);
    CHECK_THROWS_AS(
        finetune(fx.base, incomplete, fx.train, fx.valid,
                 quick_config(MetricKind::RougeMean, 1), fx.base, fx.corpus.vocab),
        DataError);
  }

  SUBCASE("validation consults only the configured metric") {
    testing::reset_metric_counts();
    (void)finetune(fx.base, fx.candidates, fx.train, fx.valid,
                   quick_config(MetricKind::DaeLike, 3), fx.base,
                   fx.corpus.vocab);
    CHECK(testing::metric_count(MetricKind::DaeLike) > 0);
    CHECK(testing::metric_count(MetricKind::RougeMean) == 0);
    CHECK(testing::metric_count(MetricKind::Rouge1) == 0);
    CHECK(testing::metric_count(MetricKind::BartLike) == 0);

    testing::reset_metric_counts();
    (void)finetune(fx.base, fx.candidates, fx.train, fx.valid,
                   quick_config(MetricKind::BartLike, 3), fx.base,
                   fx.corpus.vocab);
    CHECK(testing::metric_count(MetricKind::BartLike) > 0);
    CHECK(testing::metric_count(MetricKind::DaeLike) == 0);
  }
}

TEST_CASE("fine-tuning with the contrastive term beats the gamma=0 control "
          "on its own metric") {
  // Mean over three seeds of final validation BartLike.
  double tuned_total = 0.0;
  double control_total = 0.0;
  for (const std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const Fixture fx(seed, 32, 10, 8);
    TrainConfig config = quick_config(MetricKind::BartLike, seed);
    config.max_epochs = 4;
    const TrainedSystem tuned = finetune(fx.base, fx.candidates, fx.train,
                                         fx.valid, config, fx.base,
                                         fx.corpus.vocab);
    TrainConfig control_config = config;
    control_config.crl.gamma = 0.0;
    const TrainedSystem control = finetune(fx.base, fx.candidates, fx.train,
                                           fx.valid, control_config, fx.base,
                                           fx.corpus.vocab);
    tuned_total +=
        *std::max_element(tuned.validation_history.begin(),
                          tuned.validation_history.end());
    control_total +=
        *std::max_element(control.validation_history.begin(),
                          control.validation_history.end());
  }
  CHECK(tuned_total / 3.0 >= control_total / 3.0);
}
