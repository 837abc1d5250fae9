#include "crl/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "crl/errors.hpp"
#include "crl/rng.hpp"

namespace crl {
namespace {

using nlohmann::json;

const std::vector<std::string>& subject_pool() {
  static const std::vector<std::string> v = {
      "alice", "bob",   "carol", "dave",  "erin",  "frank", "grace",
      "heidi", "ivan",  "judy",  "karl",  "laura", "mike",  "nancy",
      "oscar", "peggy", "quinn", "rachel", "steve", "trudy"};
  return v;
}

const std::vector<std::string>& verb_pool() {
  static const std::vector<std::string> v = {
      "sees",  "likes", "finds",  "holds", "makes",  "takes", "gives",
      "keeps", "sells", "buys",   "paints", "moves", "opens", "closes",
      "reads", "writes", "lifts", "drops", "cleans", "builds"};
  return v;
}

const std::vector<std::string>& object_pool() {
  static const std::vector<std::string> v = {
      "apple",  "book",   "chair",  "door",   "engine", "flower", "guitar",
      "hammer", "island", "jacket", "kettle", "ladder", "mirror", "needle",
      "orange", "piano",  "quilt",  "ribbon", "stone",  "table"};
  return v;
}

std::vector<std::string> take_words(const std::vector<std::string>& base,
                                    const std::string& prefix, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (i < static_cast<int>(base.size())) {
      out.push_back(base[static_cast<std::size_t>(i)]);
    } else {
      out.push_back(prefix + std::to_string(i));
    }
  }
  return out;
}

std::string require_string_field(const json& record, const char* field,
                                 int line_no) {
  if (!record.contains(field) || !record[field].is_string()) {
    throw DataError("corpus line " + std::to_string(line_no) +
                    ": missing or non-string field \"" + field + "\"");
  }
  return record[field].get<std::string>();
}

}  // namespace

std::vector<ExamplePair> load_corpus(const std::filesystem::path& path,
                                     const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path.string());
  std::vector<ExamplePair> pairs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": malformed record: " + e.what());
    }
    ExamplePair pair;
    pair.id = require_string_field(record, "id", line_no);
    const std::string doc_text = require_string_field(record, "document", line_no);
    const std::string ref_text = require_string_field(record, "reference", line_no);
    if (!seen_ids.insert(pair.id).second) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": duplicate id \"" + pair.id + "\"");
    }
    pair.document = tokenize(vocab, doc_text);
    pair.reference = tokenize(vocab, ref_text);
    if (pair.document.empty()) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": empty document text");
    }
    if (pair.reference.empty()) {
      throw DataError("corpus line " + std::to_string(line_no) +
                      ": empty reference text");
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<ExamplePair>& pairs,
                 const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path.string());
  for (const auto& pair : pairs) {
    json record;
    record["id"] = pair.id;
    record["document"] = detokenize(vocab, pair.document);
    record["reference"] = detokenize(vocab, pair.reference);
    out << record.dump() << '\n';
  }
}

SynthCorpus generate_synthetic(const SynthConfig& config) {
  if (config.num_examples < 1) throw DataError("num_examples must be >= 1");
  if (config.facts_per_doc < 2) throw DataError("facts_per_doc must be >= 2");
  if (config.vocab_size < 20) throw DataError("vocab_size must be >= 20");

  SynthCorpus corpus;
  corpus.vocab.add("the");
  corpus.vocab.add(".");

  // 3 specials + "the" + "." are fixed; the rest are content words split
  // into three near-equal pools.
  const int content = config.vocab_size - 5;
  const int n_subj = (content + 2) / 3;
  const int n_verb = (content + 1) / 3;
  const int n_obj = content / 3;
  const auto subjects = take_words(subject_pool(), "subj", n_subj);
  const auto verbs = take_words(verb_pool(), "verb", n_verb);
  const auto objects = take_words(object_pool(), "obj", n_obj);

  std::vector<TokenId> subj_ids, verb_ids, obj_ids;
  for (const auto& w : subjects) subj_ids.push_back(corpus.vocab.add(w));
  for (const auto& w : verbs) verb_ids.push_back(corpus.vocab.add(w));
  for (const auto& w : objects) obj_ids.push_back(corpus.vocab.add(w));

  const long long combos = static_cast<long long>(subj_ids.size()) *
                           static_cast<long long>(verb_ids.size()) *
                           static_cast<long long>(obj_ids.size());
  if (combos < config.facts_per_doc) {
    throw DataError("vocabulary too small to form " +
                    std::to_string(config.facts_per_doc) + " distinct facts");
  }

  const TokenId the_id = corpus.vocab.lookup("the");
  const TokenId period_id = corpus.vocab.lookup(".");

  Rng rng(config.seed);
  const int id_width =
      static_cast<int>(std::to_string(config.num_examples).size());

  corpus.pairs.reserve(static_cast<std::size_t>(config.num_examples));
  for (int ex = 0; ex < config.num_examples; ++ex) {
    std::set<std::array<TokenId, 3>> used;
    std::vector<std::array<TokenId, 3>> facts;
    while (static_cast<int>(facts.size()) < config.facts_per_doc) {
      std::array<TokenId, 3> fact = {
          subj_ids[rng.next_below(subj_ids.size())],
          verb_ids[rng.next_below(verb_ids.size())],
          obj_ids[rng.next_below(obj_ids.size())]};
      if (used.insert(fact).second) facts.push_back(fact);
    }

    ExamplePair pair;
    std::ostringstream id_os;
    id_os << "ex" << std::setw(id_width) << std::setfill('0') << (ex + 1);
    pair.id = id_os.str();
    const int ref_facts = (config.facts_per_doc + 1) / 2;
    for (int k = 0; k < config.facts_per_doc; ++k) {
      const auto& f = facts[static_cast<std::size_t>(k)];
      const TokenSeq sentence = {the_id, f[0], f[1], the_id, f[2], period_id};
      pair.document.insert(pair.document.end(), sentence.begin(),
                           sentence.end());
      if (k < ref_facts) {
        pair.reference.insert(pair.reference.end(), sentence.begin(),
                              sentence.end());
      }
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

TokenSeq corrupt_summary(const TokenSeq& summary, const TokenSeq& document,
                         double rate, std::uint64_t seed,
                         const Vocabulary& vocab) {
  if (summary.empty()) throw DataError("corrupt_summary: empty summary");
  if (rate < 0.0 || rate > 1.0) {
    throw DataError("corrupt_summary: rate must be within [0, 1]");
  }
  const int n_replace = static_cast<int>(
      std::ceil(rate * static_cast<double>(summary.size())));
  if (n_replace == 0) return summary;

  const std::unordered_set<TokenId> doc_tokens(document.begin(),
                                               document.end());
  std::vector<TokenId> replacements;
  for (TokenId id = 3; id < vocab.size(); ++id) {
    if (!vocab.is_stopword(id) && !doc_tokens.count(id)) {
      replacements.push_back(id);
    }
  }
  if (replacements.empty()) {
    throw DataError(
        "corrupt_summary: no vocabulary token lies outside the document");
  }

  // Corruption targets, most impactful first: in-document content tokens,
  // then already-absent content tokens, then stopwords.
  std::vector<std::size_t> tier_a, tier_b, tier_c;
  for (std::size_t pos = 0; pos < summary.size(); ++pos) {
    const TokenId tok = summary[pos];
    if (!vocab.is_stopword(tok)) {
      (doc_tokens.count(tok) ? tier_a : tier_b).push_back(pos);
    } else {
      tier_c.push_back(pos);
    }
  }

  Rng rng(seed);
  rng.shuffle(tier_a);
  rng.shuffle(tier_b);
  rng.shuffle(tier_c);
  std::vector<std::size_t> order = tier_a;
  order.insert(order.end(), tier_b.begin(), tier_b.end());
  order.insert(order.end(), tier_c.begin(), tier_c.end());

  TokenSeq out = summary;
  const int limit = std::min<int>(n_replace, static_cast<int>(order.size()));
  for (int k = 0; k < limit; ++k) {
    out[order[static_cast<std::size_t>(k)]] =
        replacements[rng.next_below(replacements.size())];
  }
  return out;
}

std::vector<HumanEvalRecord> load_human_eval(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open human-eval file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("human-eval file is empty: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "example_id,system,fac,coh,rel") {
    throw DataError("human-eval header must be "
                    "\"example_id,system,fac,coh,rel\", got \"" +
                    line + "\"");
  }

  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    return fields;
  };

  auto parse_int = [](const std::string& s, const char* what, int line_no) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw DataError("human-eval line " + std::to_string(line_no) +
                      ": non-integer " + what + " value \"" + s + "\"");
    }
  };

  std::vector<HumanEvalRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != 5) {
      throw DataError("human-eval line " + std::to_string(line_no) +
                      ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    }
    HumanEvalRecord rec;
    rec.example_id = fields[0];
    rec.system = fields[1];
    rec.fac = parse_int(fields[2], "fac", line_no);
    rec.coh = parse_int(fields[3], "coh", line_no);
    rec.rel = parse_int(fields[4], "rel", line_no);
    if (rec.fac != 0 && rec.fac != 1) {
      throw DataError("human-eval line " + std::to_string(line_no) +
                      ": fac must be 0 or 1, got " + fields[2]);
    }
    if (rec.coh < 1 || rec.coh > 5) {
      throw DataError("human-eval line " + std::to_string(line_no) +
                      ": coh must be within 1..5, got " + fields[3]);
    }
    if (rec.rel < 1 || rec.rel > 5) {
      throw DataError("human-eval line " + std::to_string(line_no) +
                      ": rel must be within 1..5, got " + fields[4]);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace crl
