#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crl {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// One source document paired with its reference summary, both tokenized.
struct ExamplePair {
  std::string id;
  TokenSeq document;
  TokenSeq reference;
};

// One annotator judgment: binary factuality plus 1-5 Likert coherence and
// relevance.
struct HumanEvalRecord {
  std::string example_id;
  std::string system;
  int fac = 0;
  int coh = 1;
  int rel = 1;
};

}  // namespace crl
