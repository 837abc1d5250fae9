#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "crl/crl_loss.hpp"
#include "crl/errors.hpp"
#include "crl/rng.hpp"

using namespace crl;

namespace {

// Independent double-loop oracle (kept deliberately plain).
double oracle_ctr(const std::vector<double>& f, double lambda) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (j <= i) continue;
      const double term =
          f[j] - f[i] + static_cast<double>(j - i) * lambda;
      total += std::max(0.0, term);
    }
  }
  return total;
}

Candidate make_candidate(TokenSeq tokens, double metric_value,
                         MetricKind kind = MetricKind::RougeMean) {
  Candidate c;
  c.tokens = std::move(tokens);
  c.metric_scores[kind] = metric_value;
  return c;
}

}  // namespace

TEST_CASE("f_score substitutes directly") {
  const std::vector<double> lp = {-0.5, -0.5};
  CHECK(f_score(lp, 1.0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(f_score(lp, 0.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(f_score(std::vector<double>{-2.0}, 2.0) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK_THROWS_AS(f_score(std::vector<double>{}, 1.0), DataError);
}

TEST_CASE("contrastive_loss hand examples") {
  CHECK(contrastive_loss(std::vector<double>{-1.0, -2.0, -2.5}, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(contrastive_loss(std::vector<double>{0.0, -1.0, -2.0}, 1.0) == 0.0);
  CHECK(contrastive_loss(std::vector<double>{-3.0}, 1.0) == 0.0);
}

TEST_CASE("contrastive_loss matches the pairwise oracle") {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.next_below(7);
    std::vector<double> f(n);
    for (double& x : f) x = -6.0 + 12.0 * rng.next_real();
    for (const double lambda : {0.0, 0.5, 1.0}) {
      CHECK(contrastive_loss(f, lambda) ==
            doctest::Approx(oracle_ctr(f, lambda)).epsilon(1e-9));
    }
  }
}

TEST_CASE("contrastive_loss is shift-invariant") {
  // f values on a dyadic grid so that f + c is exact in double arithmetic
  // and invariance holds bitwise.
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.next_below(7);
    std::vector<double> f(n);
    for (double& x : f) {
      x = -static_cast<double>(rng.next_below(5 << 20)) * 0x1.0p-20;
    }
    for (const double shift : {1.0, -2.0, 0.5, 4.25}) {
      std::vector<double> shifted = f;
      for (double& x : shifted) x += shift;
      for (const double lambda : {0.0, 1.0}) {
        CHECK(contrastive_loss(shifted, lambda) == contrastive_loss(f, lambda));
      }
    }
  }
}

TEST_CASE("monotone response to the extremes") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.next_below(6);
    std::vector<double> f(n);
    for (double& x : f) x = -5.0 + 10.0 * rng.next_real();
    const double base = contrastive_loss(f, 1.0);

    std::vector<double> better_best = f;
    better_best[0] += 0.5 + rng.next_real();
    CHECK(contrastive_loss(better_best, 1.0) <= base + 1e-12);

    std::vector<double> better_worst = f;
    better_worst[n - 1] += 0.5 + rng.next_real();
    CHECK(contrastive_loss(better_worst, 1.0) >= base - 1e-12);
  }
}

TEST_CASE("lambda=0 vanishes exactly when f agrees with the ranking") {
  const std::vector<double> agreeing = {-0.5, -0.5, -1.0};
  CHECK(contrastive_loss(agreeing, 0.0) == 0.0);
  const std::vector<double> disagreeing = {-1.0, -0.5};
  CHECK(contrastive_loss(disagreeing, 0.0) > 0.0);
}

TEST_CASE("rank_candidates") {
  SUBCASE("orders by metric value descending") {
    std::vector<Candidate> cands = {make_candidate({3}, 0.2),
                                    make_candidate({4}, 0.9),
                                    make_candidate({5}, 0.5)};
    const auto ranked = rank_candidates(cands, MetricKind::RougeMean, "ex");
    REQUIRE(ranked.candidates.size() == 3);
    CHECK(ranked.candidates[0].tokens == TokenSeq{4});
    CHECK(ranked.candidates[1].tokens == TokenSeq{5});
    CHECK(ranked.candidates[2].tokens == TokenSeq{3});
    CHECK(ranked.example_id == "ex");
    CHECK(ranked.metric == MetricKind::RougeMean);
  }

  SUBCASE("removes exact duplicates keeping the first") {
    std::vector<Candidate> cands = {make_candidate({3, 4}, 0.7),
                                    make_candidate({3, 4}, 0.2),
                                    make_candidate({5}, 0.5)};
    const auto ranked = rank_candidates(cands, MetricKind::RougeMean);
    REQUIRE(ranked.candidates.size() == 2);
    CHECK(ranked.candidates[0].metric_scores.at(MetricKind::RougeMean) == 0.7);
  }

  SUBCASE("ties keep original order") {
    std::vector<Candidate> cands = {make_candidate({3}, 0.5),
                                    make_candidate({4}, 0.5),
                                    make_candidate({5}, 0.5)};
    const auto ranked = rank_candidates(cands, MetricKind::RougeMean);
    CHECK(ranked.candidates[0].tokens == TokenSeq{3});
    CHECK(ranked.candidates[1].tokens == TokenSeq{4});
    CHECK(ranked.candidates[2].tokens == TokenSeq{5});
  }

  SUBCASE("missing metric score is an error") {
    std::vector<Candidate> cands = {make_candidate({3}, 0.5, MetricKind::Rouge1)};
    CHECK_THROWS_AS(rank_candidates(cands, MetricKind::DaeLike), DataError);
  }

  SUBCASE("empty list is an error") {
    CHECK_THROWS_AS(rank_candidates({}, MetricKind::RougeMean), DataError);
  }
}

TEST_CASE("combined_loss") {
  SUBCASE("gamma=0 reduces to the MLE value") {
    const auto out = combined_loss(2.5, 9.0, 0.0);
    CHECK(out.combined == 2.5);
  }
  SUBCASE("hand arithmetic") {
    const auto out = combined_loss(2.0, 0.5, 100.0);
    CHECK(out.combined == doctest::Approx(52.0).epsilon(1e-12));
    CHECK(out.mle == 2.0);
    CHECK(out.ctr == 0.5);
  }
  SUBCASE("breakdown identity holds") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
      const double mle = rng.next_real() * 10.0;
      const double ctr = rng.next_real() * 5.0;
      const double gamma = rng.next_real() * 200.0;
      const auto out = combined_loss(mle, ctr, gamma);
      CHECK(std::abs(out.combined - (out.mle + gamma * out.ctr)) < 1e-9);
    }
  }
  SUBCASE("non-finite inputs are rejected") {
    CHECK_THROWS_AS(
        combined_loss(std::numeric_limits<double>::infinity(), 0.0, 1.0),
        NumericError);
  }
}
