#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "crl/decoding.hpp"
#include "crl/errors.hpp"
#include "crl/vocab.hpp"

using namespace crl;

namespace {

ModelConfig toy_config(int vocab, int hidden) {
  ModelConfig config;
  config.vocab_size = vocab;
  config.hidden_size = hidden;
  config.context_window = 8;
  return config;
}

struct Scored {
  TokenSeq tokens;
  double score;
};

// Independent oracle: every surface over the non-end emittable tokens, of
// length < max_length with an end-marker step, or exactly max_length without
// one, scored by teacher forcing. Mirrors the completion rule of the search.
std::vector<Scored> enumerate_all(const SeqModel& model, const TokenSeq& doc,
                                  int max_length) {
  const int v = model.config().vocab_size;
  std::vector<TokenId> emittable;
  for (TokenId tok = 0; tok < v; ++tok) {
    if (tok != Vocabulary::kBos && tok != Vocabulary::kEos) {
      emittable.push_back(tok);
    }
  }

  std::vector<Scored> out;
  TokenSeq prefix;

  auto score_prefix = [&](bool with_eos) {
    double total = 0.0;
    if (!prefix.empty()) {
      for (double lp : sequence_log_probs(model, doc, prefix)) total += lp;
    }
    if (with_eos) {
      const auto dist = next_token_dist(model, doc, prefix);
      total += std::log(dist[static_cast<std::size_t>(Vocabulary::kEos)]);
    }
    return total;
  };

  auto recurse = [&](auto&& self, int depth) -> void {
    if (depth < max_length) {
      // terminate here via the end marker (empty surface included)
      out.push_back({prefix, score_prefix(true)});
    } else {
      out.push_back({prefix, score_prefix(false)});
      return;
    }
    for (TokenId tok : emittable) {
      prefix.push_back(tok);
      self(self, depth + 1);
      prefix.pop_back();
    }
  };
  recurse(recurse, 0);
  return out;
}

bool same_candidates(const Candidate& a, const Candidate& b) {
  return a.tokens == b.tokens && a.token_log_probs == b.token_log_probs &&
         a.total_log_prob == b.total_log_prob;
}

}  // namespace

TEST_CASE("beam width 1 equals greedy decoding") {
  const SeqModel model = SeqModel::random(toy_config(9, 8), 21, 0.5);
  const TokenSeq doc = {3, 5, 7};

  BeamConfig config;
  config.beam_width = 1;
  config.num_groups = 1;
  config.max_length = 6;
  const auto result = beam_search(model, doc, config);
  REQUIRE(!result.empty());

  // greedy reference: argmax token each step, lowest id on ties
  TokenSeq greedy;
  for (int step = 0; step < config.max_length; ++step) {
    const auto dist = next_token_dist(model, doc, greedy);
    TokenId best = -1;
    double best_p = -1.0;
    for (TokenId tok = 0; tok < 9; ++tok) {
      if (tok == Vocabulary::kBos) continue;
      if (dist[static_cast<std::size_t>(tok)] > best_p) {
        best_p = dist[static_cast<std::size_t>(tok)];
        best = tok;
      }
    }
    if (best == Vocabulary::kEos) break;
    greedy.push_back(best);
  }
  CHECK(result.front().tokens == greedy);
}

TEST_CASE("beam search matches exhaustive enumeration on a toy model") {
  // 4 content tokens next to the reserved ids
  const SeqModel model = SeqModel::random(toy_config(7, 8), 33, 0.6);
  const TokenSeq doc = {3, 4, 5, 6};
  const int max_length = 4;

  auto all = enumerate_all(model, doc, max_length);
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });

  SUBCASE("top sequence") {
    BeamConfig config;
    config.beam_width = 8;
    config.max_length = max_length;
    const auto result = beam_search(model, doc, config);
    REQUIRE(!result.empty());
    CHECK(result.front().tokens == all.front().tokens);
    CHECK(result.front().total_log_prob ==
          doctest::Approx(all.front().score).epsilon(1e-12));
  }

  SUBCASE("width covering every sequence returns the exact top-k") {
    // 5 emittable non-end tokens, depth 3: 1 + 5 + 25 + 125 prefixes
    const int shorter = 3;
    auto small = enumerate_all(model, doc, shorter);
    std::sort(small.begin(), small.end(),
              [](const Scored& a, const Scored& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.tokens < b.tokens;
              });
    BeamConfig config;
    config.beam_width = 200;  // > 125 + 31 prefixes, nothing can fall out
    config.max_length = shorter;
    const auto result = beam_search(model, doc, config);
    REQUIRE(result.size() == std::min<std::size_t>(small.size(), 200));
    for (std::size_t i = 0; i < result.size(); ++i) {
      CHECK(result[i].tokens == small[i].tokens);
      CHECK(result[i].total_log_prob ==
            doctest::Approx(small[i].score).epsilon(1e-12));
    }
  }
}

TEST_CASE("candidates are valid and sorted") {
  const SeqModel model = SeqModel::random(toy_config(10, 8), 5, 0.4);
  const TokenSeq doc = {4, 6, 8};
  BeamConfig config;
  config.beam_width = 6;
  config.max_length = 5;
  const auto result = beam_search(model, doc, config);
  REQUIRE(!result.empty());
  for (std::size_t i = 0; i < result.size(); ++i) {
    const auto& cand = result[i];
    CHECK(cand.tokens.size() <= 5);
    for (TokenId tok : cand.tokens) {
      CHECK(tok >= 0);
      CHECK(tok < 10);
      CHECK(tok != Vocabulary::kBos);
      CHECK(tok != Vocabulary::kEos);
    }
    CHECK(cand.token_log_probs.size() == cand.tokens.size());
    if (i > 0) CHECK(result[i - 1].total_log_prob >= cand.total_log_prob);
    // total includes the end-marker step for early-stopped surfaces, so it
    // is bounded by the surface log-probability.
    double surface = 0.0;
    for (double lp : cand.token_log_probs) surface += lp;
    CHECK(cand.total_log_prob <= surface + 1e-12);
  }
}

TEST_CASE("decoding is deterministic") {
  const SeqModel model = SeqModel::random(toy_config(9, 6), 77, 0.5);
  const TokenSeq doc = {3, 4};
  BeamConfig config;
  config.beam_width = 4;
  config.num_groups = 4;
  config.max_length = 5;
  config.diversity_strength = 0.7;
  const auto a = diverse_beam_search(model, doc, config);
  const auto b = diverse_beam_search(model, doc, config);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(same_candidates(a[i], b[i]));
    CHECK(a[i].group == b[i].group);
  }
}

TEST_CASE("diverse beam search with one group reduces to beam search") {
  const SeqModel model = SeqModel::random(toy_config(9, 7), 13, 0.5);
  const TokenSeq doc = {5, 6, 7};
  BeamConfig config;
  config.beam_width = 4;
  config.num_groups = 1;
  config.max_length = 5;
  config.diversity_strength = 2.5;

  const auto diverse = diverse_beam_search(model, doc, config);
  const auto plain = beam_search(model, doc, config);
  REQUIRE(diverse.size() == plain.size());
  for (std::size_t i = 0; i < diverse.size(); ++i) {
    CHECK(same_candidates(diverse[i], plain[i]));
  }
}

TEST_CASE("zero diversity strength makes all groups identical") {
  const SeqModel model = SeqModel::random(toy_config(9, 7), 17, 0.5);
  const TokenSeq doc = {4, 5};
  BeamConfig config;
  config.beam_width = 6;
  config.num_groups = 3;
  config.max_length = 5;
  config.diversity_strength = 0.0;

  const auto result = diverse_beam_search(model, doc, config);
  REQUIRE(result.size() % 3 == 0);
  const std::size_t per_group = result.size() / 3;
  for (std::size_t g = 1; g < 3; ++g) {
    for (std::size_t i = 0; i < per_group; ++i) {
      CHECK(result[i].tokens == result[g * per_group + i].tokens);
      CHECK(result[i].total_log_prob ==
            result[g * per_group + i].total_log_prob);
    }
  }
}

TEST_CASE("strong diversity forces distinct first tokens") {
  const SeqModel model = SeqModel::random(toy_config(9, 8), 29, 0.5);
  const TokenSeq doc = {3, 6, 8};
  BeamConfig config;
  config.beam_width = 4;
  config.num_groups = 4;
  config.max_length = 4;
  config.diversity_strength = 1e3;

  const auto result = diverse_beam_search(model, doc, config);
  REQUIRE(result.size() == 4);
  std::set<TokenId> firsts;
  for (const auto& cand : result) {
    firsts.insert(cand.tokens.empty() ? Vocabulary::kEos : cand.tokens[0]);
  }
  CHECK(firsts.size() == 4);
}

TEST_CASE("group labels are recorded") {
  const SeqModel model = SeqModel::random(toy_config(9, 6), 31, 0.5);
  BeamConfig config;
  config.beam_width = 6;
  config.num_groups = 3;
  config.max_length = 4;
  const auto result = diverse_beam_search(model, {3, 4, 5}, config);
  std::set<int> groups;
  for (const auto& cand : result) groups.insert(cand.group);
  CHECK(groups == std::set<int>{0, 1, 2});
}

TEST_CASE("invalid beam configurations are rejected") {
  const SeqModel model = SeqModel::random(toy_config(9, 6), 1, 0.5);
  BeamConfig config;
  config.beam_width = 5;
  config.num_groups = 3;
  CHECK_THROWS_AS(diverse_beam_search(model, {3}, config), DataError);
  config.beam_width = 0;
  config.num_groups = 1;
  CHECK_THROWS_AS(beam_search(model, {3}, config), DataError);
}
