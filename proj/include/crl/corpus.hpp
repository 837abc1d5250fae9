#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "crl/types.hpp"
#include "crl/vocab.hpp"

namespace crl {

struct SynthConfig {
  int num_examples = 1000;
  int facts_per_doc = 4;
  int vocab_size = 50;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  Vocabulary vocab;
  std::vector<ExamplePair> pairs;
};

// Reads a JSON-lines corpus: one object per line with string fields
// id/document/reference. Preserves file order; ids must be unique.
std::vector<ExamplePair> load_corpus(const std::filesystem::path& path,
                                     const Vocabulary& vocab);

void save_corpus(const std::filesystem::path& path,
                 const std::vector<ExamplePair>& pairs,
                 const Vocabulary& vocab);

// Builds a corpus of subject-verb-object "fact" sentences. Each document
// concatenates facts_per_doc distinct facts; the reference keeps the first
// ceil(facts_per_doc / 2) of them, so every reference token occurs in its
// document. Pure function of the config, including the seed.
SynthCorpus generate_synthetic(const SynthConfig& config);

// Replaces ceil(rate * summary.length) tokens with vocabulary tokens that do
// not occur in the document. Positions holding in-document content tokens
// are corrupted first, then remaining content, then stopwords.
TokenSeq corrupt_summary(const TokenSeq& summary, const TokenSeq& document,
                         double rate, std::uint64_t seed,
                         const Vocabulary& vocab);

// Reads a comma-delimited annotation table with the exact header
// example_id,system,fac,coh,rel and enforces the score ranges.
std::vector<HumanEvalRecord> load_human_eval(
    const std::filesystem::path& path);

}  // namespace crl
