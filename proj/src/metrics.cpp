#include "crl/metrics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "crl/errors.hpp"

namespace crl {
namespace {

double f1(double overlap, double hyp_total, double ref_total) {
  if (hyp_total == 0.0 && ref_total == 0.0) return 1.0;  // vacuous match
  if (hyp_total == 0.0 || ref_total == 0.0) return 0.0;
  const double precision = overlap / hyp_total;
  const double recall = overlap / ref_total;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::map<std::vector<TokenId>, int> ngram_counts(const TokenSeq& seq, int n) {
  std::map<std::vector<TokenId>, int> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    std::vector<TokenId> gram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                              seq.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[gram];
  }
  return counts;
}

}  // namespace

double rouge_n(const TokenSeq& hypothesis, const TokenSeq& reference, int n) {
  if (n != 1 && n != 2) throw DataError("rouge_n: n must be 1 or 2");
  if (reference.empty()) throw DataError("rouge_n: empty reference");
  const auto hyp = ngram_counts(hypothesis, n);
  const auto ref = ngram_counts(reference, n);
  double overlap = 0.0;
  double hyp_total = 0.0;
  double ref_total = 0.0;
  for (const auto& [gram, count] : hyp) hyp_total += count;
  for (const auto& [gram, count] : ref) ref_total += count;
  for (const auto& [gram, count] : ref) {
    const auto it = hyp.find(gram);
    if (it != hyp.end()) overlap += std::min(count, it->second);
  }
  return f1(overlap, hyp_total, ref_total);
}

double rouge_l(const TokenSeq& hypothesis, const TokenSeq& reference) {
  if (reference.empty()) throw DataError("rouge_l: empty reference");
  const std::size_t n = hypothesis.size();
  const std::size_t m = reference.size();
  std::vector<int> prev(m + 1, 0);
  std::vector<int> cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (hypothesis[i - 1] == reference[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[m];
  return f1(lcs, static_cast<double>(n), static_cast<double>(m));
}

double bart_like(const SeqModel& scorer, const TokenSeq& document,
                 const TokenSeq& summary) {
  if (summary.empty()) throw DataError("bart_like: empty summary");
  const auto logps = sequence_log_probs(scorer, document, summary);
  double total = 0.0;
  for (double lp : logps) total += lp;
  return total / static_cast<double>(logps.size());
}

double dae_like(const TokenSeq& document, const TokenSeq& summary, int window,
                const Vocabulary& vocab) {
  if (summary.empty()) throw DataError("dae_like: empty summary");
  if (window < 2) throw DataError("dae_like: window must be >= 2");

  std::unordered_map<TokenId, std::vector<int>> positions;
  for (std::size_t i = 0; i < document.size(); ++i) {
    positions[document[i]].push_back(static_cast<int>(i));
  }
  const auto present = [&](TokenId tok) { return positions.count(tok) > 0; };

  if (summary.size() == 1) return present(summary[0]) ? 1.0 : 0.1;

  double score = 1.0;
  for (TokenId tok : summary) {
    if (!present(tok)) score = std::min(score, 0.1);
  }

  TokenSeq content;
  for (TokenId tok : summary) {
    if (!vocab.is_stopword(tok)) content.push_back(tok);
  }

  const auto co_occur = [&](TokenId u, TokenId v) {
    const auto& pu = positions.at(u);
    const auto& pv = positions.at(v);
    for (int a : pu) {
      for (int b : pv) {
        if (std::abs(a - b) <= window - 1) return true;
      }
    }
    return false;
  };

  for (std::size_t i = 0; i + 1 < content.size(); ++i) {
    const TokenId u = content[i];
    const TokenId v = content[i + 1];
    if (!present(u) || !present(v)) {
      score = std::min(score, 0.1);
    } else if (!co_occur(u, v)) {
      score = std::min(score, 0.5);
    }
  }
  return score;
}

namespace {

std::array<std::atomic<long>, 6>& counters() {
  static std::array<std::atomic<long>, 6> counts{};
  return counts;
}

}  // namespace

MetricScore evaluate_metric(MetricKind kind, const TokenSeq& summary,
                            const TokenSeq& document,
                            const TokenSeq& reference, const SeqModel* scorer,
                            const Vocabulary& vocab, int dae_window) {
  counters()[static_cast<std::size_t>(kind)].fetch_add(
      1, std::memory_order_relaxed);
  MetricScore score;
  score.kind = kind;
  switch (kind) {
    case MetricKind::Rouge1:
      score.value = rouge_n(summary, reference, 1);
      break;
    case MetricKind::Rouge2:
      score.value = rouge_n(summary, reference, 2);
      break;
    case MetricKind::RougeL:
      score.value = rouge_l(summary, reference);
      break;
    case MetricKind::RougeMean:
      score.value = (rouge_n(summary, reference, 1) +
                     rouge_n(summary, reference, 2) +
                     rouge_l(summary, reference)) /
                    3.0;
      break;
    case MetricKind::BartLike:
      if (scorer == nullptr) {
        throw DataError("evaluate_metric: BartLike requires a scorer model");
      }
      score.value = bart_like(*scorer, document, summary);
      break;
    case MetricKind::DaeLike:
      score.value = dae_like(document, summary, dae_window, vocab);
      break;
  }
  return score;
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Rouge1: return "rouge-1";
    case MetricKind::Rouge2: return "rouge-2";
    case MetricKind::RougeL: return "rouge-l";
    case MetricKind::RougeMean: return "rouge";
    case MetricKind::BartLike: return "bart-like";
    case MetricKind::DaeLike: return "dae-like";
  }
  return "unknown";
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "rouge-1") return MetricKind::Rouge1;
  if (name == "rouge-2") return MetricKind::Rouge2;
  if (name == "rouge-l") return MetricKind::RougeL;
  if (name == "rouge" || name == "rouge-mean") return MetricKind::RougeMean;
  if (name == "bart-like" || name == "bart") return MetricKind::BartLike;
  if (name == "dae-like" || name == "dae") return MetricKind::DaeLike;
  throw DataError("unknown metric name: " + name +
                  " (expected rouge, bart-like, or dae-like)");
}

namespace testing {

void reset_metric_counts() {
  for (auto& c : counters()) c.store(0, std::memory_order_relaxed);
}

long metric_count(MetricKind kind) {
  return counters()[static_cast<std::size_t>(kind)].load(
      std::memory_order_relaxed);
}

}  // namespace testing

}  // namespace crl
