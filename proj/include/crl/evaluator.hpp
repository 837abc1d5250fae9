#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crl/model.hpp"
#include "crl/trainer.hpp"
#include "crl/types.hpp"
#include "crl/vocab.hpp"

namespace crl {

struct EvalRow {
  std::string system;
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  double b = 0.0;
  double d = 0.0;
  std::optional<double> fac;
  std::optional<double> coh;
  std::optional<double> rel;
};

struct EvalReport {
  std::string dataset;
  int sample_count = 0;
  std::vector<EvalRow> rows;
};

// Per-system summary row plus the mechanical factuality proxy.
struct SystemScores {
  EvalRow row;
  double hallucination = 0.0;  // mean over examples
};

// Decodes every test document (plain beam search, top nonempty summary) and
// returns per-metric means: ROUGE variants against the reference, the
// surrogate B and D against the document, and the hallucination proxy.
SystemScores evaluate_system(const std::string& system_name,
                             const SeqModel& model,
                             const std::vector<ExamplePair>& test_corpus,
                             const SeqModel& scorer, const Vocabulary& vocab,
                             int beam_width = 4, int max_length = 16,
                             int dae_window = 10);

// Fraction of summary content tokens absent from the document. A summary
// with no content tokens has no checkable claims and scores 0.
double hallucination_rate(const TokenSeq& summary, const TokenSeq& document,
                          const Vocabulary& vocab);

struct HumanAggregate {
  std::string system;
  double fac = 0.0;
  double coh = 0.0;
  double rel = 0.0;
  int count = 0;
};

// Arithmetic means per system, in first-appearance order. Throws on a
// duplicate (example_id, system) pair.
std::vector<HumanAggregate> aggregate_human_eval(
    std::span<const HumanEvalRecord> records);

enum class ReportStyle { Text, Delimited };

// Columns in fixed order (R-1, R-2, R-L, B, D, then FAC/COH/REL when
// present). ROUGE and human columns print with 2 fractional digits (ROUGE
// scaled to 0-100); B and D print raw surrogate units with 2 digits. The
// text style marks each column's best value with '*'.
std::string render_report(const EvalReport& report, ReportStyle style);

}  // namespace crl
