#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crl/crl_loss.hpp"
#include "crl/decoding.hpp"
#include "crl/trainer.hpp"
#include "crl/vocab.hpp"

#include <json.hpp>

namespace crl {

std::uint64_t fnv64_file(const std::filesystem::path& path);

// Run manifest: the resolved configuration plus input checksums, written
// into the run directory before any long-running work. Re-running a command
// from its manifest reproduces its outputs byte for byte.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::filesystem::path> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
nlohmann::json read_manifest(const std::filesystem::path& path);

// Candidate dump: one JSON object per document with the decoded candidates,
// their tokens, penalty-free model log-probability, group index, and metric
// scores (full precision, round-trip exact).
void write_candidate_sets(const std::filesystem::path& path,
                          const std::vector<ExamplePair>& corpus,
                          const CandidateSetMap& sets,
                          const Vocabulary& vocab);
CandidateSetMap read_candidate_sets(const std::filesystem::path& path);

// Diagnostic dump of one metric's ranking: ordered candidate texts, metric
// values, and f scores (4 fractional digits).
void write_ranked_dump(const std::filesystem::path& path,
                       const std::vector<RankedCandidateSet>& sets,
                       const Vocabulary& vocab);

// Tab-separated epoch log: epoch, L_mle, L_ctr, L_com, validation score.
void write_train_log(const std::filesystem::path& path,
                     const std::vector<EpochLog>& log);

}  // namespace crl
