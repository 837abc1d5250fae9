#include "crl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "crl/decoding.hpp"
#include "crl/errors.hpp"
#include "crl/metrics.hpp"
#include "crl/parallel.hpp"

namespace crl {

double hallucination_rate(const TokenSeq& summary, const TokenSeq& document,
                          const Vocabulary& vocab) {
  if (summary.empty()) throw DataError("hallucination_rate: empty summary");
  const std::unordered_set<TokenId> doc_tokens(document.begin(),
                                               document.end());
  int content = 0;
  int absent = 0;
  for (TokenId tok : summary) {
    if (vocab.is_stopword(tok)) continue;
    ++content;
    if (!doc_tokens.count(tok)) ++absent;
  }
  if (content == 0) return 0.0;
  return static_cast<double>(absent) / static_cast<double>(content);
}

SystemScores evaluate_system(const std::string& system_name,
                             const SeqModel& model,
                             const std::vector<ExamplePair>& test_corpus,
                             const SeqModel& scorer, const Vocabulary& vocab,
                             int beam_width, int max_length, int dae_window) {
  if (test_corpus.empty()) throw DataError("evaluate_system: empty corpus");

  BeamConfig beam;
  beam.beam_width = beam_width;
  beam.max_length = max_length;
  beam.num_groups = 1;
  beam.diversity_strength = 0.0;

  struct PerExample {
    double r1, r2, rl, b, d, halluc;
  };
  std::vector<PerExample> scores(test_corpus.size());
  std::vector<int> failed(test_corpus.size(), 0);

  par::for_index(test_corpus.size(), [&](std::size_t e) {
    const ExamplePair& pair = test_corpus[e];
    const auto candidates = beam_search(model, pair.document, beam);
    const Candidate* best = nullptr;
    for (const auto& cand : candidates) {
      if (!cand.tokens.empty()) {
        best = &cand;
        break;
      }
    }
    if (best == nullptr) {
      failed[e] = 1;
      return;
    }
    PerExample& s = scores[e];
    s.r1 = rouge_n(best->tokens, pair.reference, 1);
    s.r2 = rouge_n(best->tokens, pair.reference, 2);
    s.rl = rouge_l(best->tokens, pair.reference);
    s.b = bart_like(scorer, pair.document, best->tokens);
    s.d = dae_like(pair.document, best->tokens, dae_window, vocab);
    s.halluc = hallucination_rate(best->tokens, pair.document, vocab);
  });

  for (std::size_t e = 0; e < test_corpus.size(); ++e) {
    if (failed[e]) {
      throw DataError("evaluate_system: decoding produced no summary for " +
                      test_corpus[e].id);
    }
  }

  SystemScores out;
  out.row.system = system_name;
  const double n = static_cast<double>(test_corpus.size());
  for (const auto& s : scores) {
    out.row.r1 += s.r1 / n;
    out.row.r2 += s.r2 / n;
    out.row.rl += s.rl / n;
    out.row.b += s.b / n;
    out.row.d += s.d / n;
    out.hallucination += s.halluc / n;
  }
  return out;
}

std::vector<HumanAggregate> aggregate_human_eval(
    std::span<const HumanEvalRecord> records) {
  if (records.empty()) throw DataError("aggregate_human_eval: no records");

  std::set<std::pair<std::string, std::string>> seen;
  std::vector<HumanAggregate> aggregates;
  std::map<std::string, std::size_t> index;

  for (const auto& rec : records) {
    if (!seen.insert({rec.example_id, rec.system}).second) {
      throw DataError("duplicate human-eval pair (" + rec.example_id + ", " +
                      rec.system + ")");
    }
    auto it = index.find(rec.system);
    if (it == index.end()) {
      it = index.emplace(rec.system, aggregates.size()).first;
      aggregates.push_back(HumanAggregate{rec.system, 0.0, 0.0, 0.0, 0});
    }
    HumanAggregate& agg = aggregates[it->second];
    agg.fac += rec.fac;
    agg.coh += rec.coh;
    agg.rel += rec.rel;
    agg.count += 1;
  }
  for (auto& agg : aggregates) {
    agg.fac /= agg.count;
    agg.coh /= agg.count;
    agg.rel /= agg.count;
  }
  return aggregates;
}

namespace {

std::string format2(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

// Column values for one row, in display units.
std::vector<double> row_values(const EvalRow& row, bool with_human) {
  std::vector<double> v = {row.r1 * 100.0, row.r2 * 100.0, row.rl * 100.0,
                           row.b, row.d};
  if (with_human) {
    v.push_back(row.fac.value_or(0.0));
    v.push_back(row.coh.value_or(0.0));
    v.push_back(row.rel.value_or(0.0));
  }
  return v;
}

}  // namespace

std::string render_report(const EvalReport& report, ReportStyle style) {
  if (report.rows.empty()) throw DataError("render_report: no rows");
  const bool with_human =
      std::any_of(report.rows.begin(), report.rows.end(),
                  [](const EvalRow& r) { return r.fac.has_value(); });
  for (const auto& row : report.rows) {
    if (row.fac.has_value() != row.coh.has_value() ||
        row.fac.has_value() != row.rel.has_value()) {
      throw DataError("render_report: partial human columns for system " +
                      row.system);
    }
  }

  std::vector<std::string> headers = {"R-1", "R-2", "R-L", "B", "D"};
  if (with_human) {
    headers.insert(headers.end(), {"FAC", "COH", "REL"});
  }

  // Best value per column (maximum; ties all marked).
  const std::size_t n_cols = headers.size();
  std::vector<double> best(n_cols, -1e300);
  for (const auto& row : report.rows) {
    const auto vals = row_values(row, with_human);
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (row.fac.has_value() || c < 5) best[c] = std::max(best[c], vals[c]);
    }
  }

  std::ostringstream os;
  if (style == ReportStyle::Delimited) {
    os << "system";
    for (const auto& h : headers) os << ',' << h;
    os << '\n';
    for (const auto& row : report.rows) {
      os << row.system;
      const auto vals = row_values(row, with_human);
      for (std::size_t c = 0; c < n_cols; ++c) {
        if (c >= 5 && !row.fac.has_value()) {
          os << ',';
        } else {
          os << ',' << format2(vals[c]);
        }
      }
      os << '\n';
    }
    return os.str();
  }

  // Fixed-width text table.
  std::size_t name_width = std::string("System").size();
  for (const auto& row : report.rows) {
    name_width = std::max(name_width, row.system.size());
  }
  constexpr int kColWidth = 9;

  auto pad_left = [](const std::string& cell) {
    const std::size_t width = static_cast<std::size_t>(kColWidth);
    return std::string(cell.size() < width ? width - cell.size() : 1, ' ') +
           cell;
  };

  os << report.dataset << " (" << report.sample_count << " examples)\n";
  os << std::string(name_width, ' ');
  for (const auto& h : headers) os << pad_left(h);
  os << '\n';
  for (const auto& row : report.rows) {
    os << row.system << std::string(name_width - row.system.size(), ' ');
    const auto vals = row_values(row, with_human);
    for (std::size_t c = 0; c < n_cols; ++c) {
      std::string cell;
      if (c >= 5 && !row.fac.has_value()) {
        cell = "-";
      } else {
        cell = format2(vals[c]);
        if (vals[c] == best[c]) cell = "*" + cell;
      }
      os << pad_left(cell);
    }
    os << '\n';
  }
  os << "B and D are desk-scale surrogate metrics reported in raw units; "
        "they are not comparable across scorers.\n";
  return os.str();
}

}  // namespace crl
