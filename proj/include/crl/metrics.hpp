#pragma once

#include "crl/metric_kind.hpp"
#include "crl/model.hpp"
#include "crl/types.hpp"
#include "crl/vocab.hpp"

namespace crl {

inline constexpr int kDefaultDaeWindow = 10;

// F1 over clipped n-gram overlap counts, n in {1, 2}. When both sides have
// no n-grams the match is vacuous and scores 1; when exactly one side has
// none it scores 0.
double rouge_n(const TokenSeq& hypothesis, const TokenSeq& reference, int n);

// F1 from longest-common-subsequence length.
double rouge_l(const TokenSeq& hypothesis, const TokenSeq& reference);

// Length-normalized log-likelihood of the summary given the document under
// a frozen scorer. Always <= 0; reference-free.
double bart_like(const SeqModel& scorer, const TokenSeq& document,
                 const TokenSeq& summary);

// Worst-arc factuality surrogate. Arcs are adjacent content-token pairs of
// the summary; an arc scores 1.0 when the pair co-occurs inside a
// window-token span of the document, 0.5 when both tokens occur but never
// inside one span, 0.1 when either is absent. Every summary token also
// contributes a presence score (1.0 present / 0.1 absent), which makes the
// min-aggregate monotone under appending. Returns the minimum.
double dae_like(const TokenSeq& document, const TokenSeq& summary, int window,
                const Vocabulary& vocab);

// Footnote-style dispatch: reference-free kinds score (summary, document),
// reference-based kinds score (summary, reference). RougeMean is the
// arithmetic mean of the three ROUGE variants. scorer is required for
// BartLike only.
MetricScore evaluate_metric(MetricKind kind, const TokenSeq& summary,
                            const TokenSeq& document,
                            const TokenSeq& reference, const SeqModel* scorer,
                            const Vocabulary& vocab,
                            int dae_window = kDefaultDaeWindow);

namespace testing {
// Per-kind call counts for evaluate_metric, used to verify which metric a
// training loop consults. Thread-safe.
void reset_metric_counts();
long metric_count(MetricKind kind);
}  // namespace testing

}  // namespace crl
