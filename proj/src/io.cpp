#include "crl/io.hpp"

#include <cstdio>
#include <fstream>

#include "crl/errors.hpp"

namespace crl {

using nlohmann::json;

std::uint64_t fnv64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for checksum: " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::filesystem::create_directories(dir);
  json doc;
  doc["command"] = m.command;
  doc["config"] = m.config;
  doc["seed"] = m.seed;
  json inputs = json::object();
  for (const auto& [name, path] : m.inputs) {
    json entry;
    entry["path"] = path.string();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv64_file(path)));
    entry["fnv64"] = buf;
    inputs[name] = entry;
  }
  doc["inputs"] = inputs;
  doc["outputs"] = m.outputs;

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) {
    throw DataError("cannot write manifest in " + dir.string());
  }
  out << doc.dump(2) << '\n';
}

json read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  return doc;
}

void write_candidate_sets(const std::filesystem::path& path,
                          const std::vector<ExamplePair>& corpus,
                          const CandidateSetMap& sets,
                          const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write candidate file: " + path.string());
  for (const auto& pair : corpus) {
    const auto it = sets.find(pair.id);
    if (it == sets.end()) continue;
    json record;
    record["id"] = pair.id;
    json list = json::array();
    for (const auto& cand : it->second) {
      json c;
      c["text"] = detokenize(vocab, cand.tokens);
      c["tokens"] = cand.tokens;
      c["log_prob"] = cand.total_log_prob;
      c["token_log_probs"] = cand.token_log_probs;
      c["group"] = cand.group;
      c["f_score"] = cand.f_score;
      json scores = json::object();
      for (const auto& [kind, value] : cand.metric_scores) {
        scores[to_string(kind)] = value;
      }
      c["scores"] = scores;
      list.push_back(std::move(c));
    }
    record["candidates"] = list;
    out << record.dump() << '\n';
  }
}

CandidateSetMap read_candidate_sets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open candidate file: " + path.string());
  CandidateSetMap sets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("candidate file line " + std::to_string(line_no) +
                      ": " + e.what());
    }
    const std::string id = record.at("id").get<std::string>();
    std::vector<Candidate> list;
    for (const auto& c : record.at("candidates")) {
      Candidate cand;
      cand.tokens = c.at("tokens").get<TokenSeq>();
      cand.total_log_prob = c.at("log_prob").get<double>();
      cand.token_log_probs =
          c.at("token_log_probs").get<std::vector<double>>();
      cand.group = c.at("group").get<int>();
      cand.f_score = c.at("f_score").get<double>();
      for (const auto& [name, value] : c.at("scores").items()) {
        cand.metric_scores[metric_from_string(name)] = value.get<double>();
      }
      list.push_back(std::move(cand));
    }
    if (!sets.emplace(id, std::move(list)).second) {
      throw DataError("candidate file line " + std::to_string(line_no) +
                      ": duplicate id " + id);
    }
  }
  return sets;
}

void write_ranked_dump(const std::filesystem::path& path,
                       const std::vector<RankedCandidateSet>& sets,
                       const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write ranked dump: " + path.string());
  auto fixed4 = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  for (const auto& set : sets) {
    json record;
    record["id"] = set.example_id;
    record["metric"] = to_string(set.metric);
    json list = json::array();
    for (const auto& cand : set.candidates) {
      json c;
      c["text"] = detokenize(vocab, cand.tokens);
      c["metric_value"] = fixed4(cand.metric_scores.at(set.metric));
      c["f_score"] = fixed4(cand.f_score);
      list.push_back(std::move(c));
    }
    record["ranking"] = list;
    out << record.dump() << '\n';
  }
}

void write_train_log(const std::filesystem::path& path,
                     const std::vector<EpochLog>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write train log: " + path.string());
  out << "epoch\tmle\tctr\tcom\tvalid\n";
  char buf[256];
  for (const auto& entry : log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\t%.6f\n",
                  entry.epoch, entry.mle, entry.ctr, entry.com,
                  entry.valid_score);
    out << buf;
  }
}

}  // namespace crl
