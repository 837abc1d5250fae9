#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "crl/checkpoint.hpp"
#include "crl/corpus.hpp"
#include "crl/errors.hpp"
#include "crl/loss.hpp"
#include "crl/model.hpp"
#include "crl/optimizer.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

ModelConfig tiny_config(int vocab, int hidden) {
  ModelConfig config;
  config.vocab_size = vocab;
  config.hidden_size = hidden;
  config.context_window = 16;
  return config;
}

// A model that puts probability exactly 1.0 on `token` at every step: all
// weights zero except one huge output bias, so the softmax underflows every
// competitor to zero in double arithmetic.
SeqModel certain_model(const ModelConfig& config, TokenId token) {
  SeqModel model = SeqModel::zeros(config);
  model.slice("out_bias")[static_cast<std::size_t>(token)] = 60.0;
  return model;
}

}  // namespace

TEST_CASE("next_token_dist is normalized and deterministic") {
  const auto config = tiny_config(11, 8);
  const SeqModel model = SeqModel::random(config, 42);
  const TokenSeq doc = {3, 4, 5, 6};
  const TokenSeq prefix = {7, 8};

  const auto dist = next_token_dist(model, doc, prefix);
  REQUIRE(dist.size() == 11);
  double sum = 0.0;
  for (double p : dist) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-6);

  const auto again = next_token_dist(model, doc, prefix);
  CHECK(dist == again);
}

TEST_CASE("zero-parameter model is uniform") {
  const auto config = tiny_config(8, 8);
  const SeqModel model = SeqModel::zeros(config);
  const auto dist = next_token_dist(model, {3, 4}, {});
  for (double p : dist) CHECK(p == doctest::Approx(1.0 / 8).epsilon(1e-12));
}

TEST_CASE("sequence_log_probs shape and uniform value") {
  const auto config = tiny_config(4, 8);
  const SeqModel model = SeqModel::zeros(config);
  const TokenSeq doc = {3};
  const TokenSeq target = {3, 3, 3, 3, 3};
  const auto logps = sequence_log_probs(model, doc, target);
  REQUIRE(logps.size() == 5);
  for (double lp : logps) {
    CHECK(lp <= 0.0);
    CHECK(lp == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  }
}

TEST_CASE("certain model scores zero log-probability") {
  const auto config = tiny_config(9, 8);
  const SeqModel model = certain_model(config, 5);
  const auto logps = sequence_log_probs(model, {3, 4}, {5, 5, 5});
  for (double lp : logps) CHECK(lp == 0.0);
}

TEST_CASE("teacher-forcing consistency with next_token_dist") {
  const auto config = tiny_config(13, 12);
  const SeqModel model = SeqModel::random(config, 7, 0.3);
  const TokenSeq doc = {3, 7, 12, 4, 5};
  const TokenSeq target = {6, 9, 3, 11};

  const auto logps = sequence_log_probs(model, doc, target);
  for (std::size_t j = 0; j < target.size(); ++j) {
    const TokenSeq prefix(target.begin(),
                          target.begin() + static_cast<std::ptrdiff_t>(j));
    const auto dist = next_token_dist(model, doc, prefix);
    CHECK(std::exp(logps[j]) ==
          doctest::Approx(dist[static_cast<std::size_t>(target[j])])
              .epsilon(1e-9));
  }
}

TEST_CASE("mle_loss matches hand values") {
  SUBCASE("uniform model, vocab 8, single length-4 reference") {
    const auto config = tiny_config(8, 6);
    const SeqModel model = SeqModel::zeros(config);
    const std::vector<ExamplePair> batch = {{"a", {3, 4}, {5, 6, 7, 3}}};
    CHECK(mle_loss(model, batch) ==
          doctest::Approx(4.0 * std::log(8.0)).epsilon(1e-12));
  }
  SUBCASE("certain-and-correct model scores exactly zero") {
    const auto config = tiny_config(8, 6);
    const SeqModel model = certain_model(config, 4);
    const std::vector<ExamplePair> batch = {{"a", {3}, {4, 4, 4}}};
    CHECK(mle_loss(model, batch) == 0.0);
  }
  SUBCASE("matches per-token summation oracle") {
    const auto config = tiny_config(10, 9);
    const SeqModel model = SeqModel::random(config, 99, 0.4);
    const std::vector<ExamplePair> batch = {{"a", {3, 4, 5}, {6, 7}},
                                            {"b", {8, 9}, {3, 4, 5}}};
    double expected = 0.0;
    for (const auto& pair : batch) {
      for (double lp : sequence_log_probs(model, pair.document, pair.reference)) {
        expected -= lp;
      }
    }
    expected /= 2.0;
    CHECK(mle_loss(model, batch) == doctest::Approx(expected).epsilon(1e-9));

    double token_expected = 0.0;
    for (const auto& pair : batch) {
      for (double lp : sequence_log_probs(model, pair.document, pair.reference)) {
        token_expected -= lp;
      }
    }
    token_expected /= 5.0;
    CHECK(mle_loss(model, batch, MleNorm::TokenMean) ==
          doctest::Approx(token_expected).epsilon(1e-9));
  }
  SUBCASE("empty batch is rejected") {
    const auto config = tiny_config(8, 6);
    const SeqModel model = SeqModel::zeros(config);
    CHECK_THROWS_AS(mle_loss(model, {}), DataError);
  }
}

TEST_CASE("token ids out of range are rejected") {
  const auto config = tiny_config(6, 4);
  const SeqModel model = SeqModel::zeros(config);
  CHECK_THROWS_AS(next_token_dist(model, {3, 99}, {}), DataError);
  CHECK_THROWS_AS(sequence_log_probs(model, {3}, {99}), DataError);
}

TEST_CASE("apply_update") {
  const auto config = tiny_config(7, 5);

  SUBCASE("zero gradient with plain gradient descent is a fixed point") {
    SeqModel model = SeqModel::random(config, 1);
    const std::vector<double> before(model.params().begin(),
                                     model.params().end());
    OptimizerState opt;
    opt.kind = OptimizerKind::Sgd;
    const std::vector<double> zero(model.param_count(), 0.0);
    apply_update(model, zero, opt, 0.5);
    const std::vector<double> after(model.params().begin(),
                                    model.params().end());
    CHECK(before == after);
  }

  SUBCASE("non-finite gradient is rejected") {
    SeqModel model = SeqModel::random(config, 1);
    OptimizerState opt;
    std::vector<double> bad(model.param_count(), 0.0);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(apply_update(model, bad, opt, 0.1), NumericError);
  }

  SUBCASE("repeated updates on one batch lower the loss") {
    SeqModel model = SeqModel::random(config, 5);
    const std::vector<ExamplePair> batch = {{"a", {3, 4, 5}, {6, 3, 2}}};
    const double start = mle_loss(model, batch, MleNorm::TokenMean);
    OptimizerState opt;
    for (int i = 0; i < 50; ++i) {
      LossSpec spec;
      spec.batch = batch;
      spec.crl.gamma = 0.0;
      const auto grad = loss_gradient(model, spec);
      apply_update(model, grad, opt, 1e-2);
    }
    const double end = mle_loss(model, batch, MleNorm::TokenMean);
    CHECK(end < start);
  }
}

TEST_CASE("checkpoint round-trip") {
  const auto config = tiny_config(9, 7);
  const SeqModel model = SeqModel::random(config, 11);
  const auto dir = std::filesystem::temp_directory_path() / "crl_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";

  Rng rng(3);
  rng.next_u64();
  save_checkpoint(path, checkpoint_of(model, 17, rng.save_state()));
  const Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.config == config);
  CHECK(loaded.train_step == 17);
  CHECK(loaded.rng_state == rng.save_state());
  CHECK(loaded.params ==
        std::vector<double>(model.params().begin(), model.params().end()));

  SUBCASE("restoring then re-saving is byte-identical") {
    const auto path2 = dir / "model2.ckpt";
    save_checkpoint(path2, loaded);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)),
                              std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
  }

  SUBCASE("truncated file fails the checksum") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 9);
    const auto bad = dir / "truncated.ckpt";
    std::ofstream out(bad, std::ios::binary);
    out << bytes;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
  }

  SUBCASE("config mismatch is detected") {
    ModelConfig other = config;
    other.vocab_size = 12;
    CHECK_THROWS_AS(require_config(loaded, other), DataError);
    CHECK_NOTHROW(require_config(loaded, config));
  }
}

TEST_CASE("identical seeds give identical models") {
  const auto config = tiny_config(10, 8);
  const SeqModel a = SeqModel::random(config, 123);
  const SeqModel b = SeqModel::random(config, 123);
  CHECK(std::vector<double>(a.params().begin(), a.params().end()) ==
        std::vector<double>(b.params().begin(), b.params().end()));
}
