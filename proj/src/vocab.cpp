#include "crl/vocab.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <set>

#include "crl/errors.hpp"

namespace crl {
namespace {

const std::set<std::string>& stopword_list() {
  static const std::set<std::string> words = {
      "the", "a",  "an", "and", "or", "but", "of",
      "to",  "in", "on", "at",  "is", "are",
  };
  return words;
}

bool is_stopword_string(const std::string& tok) {
  if (tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]))) {
    return true;
  }
  if (tok == "<unk>" || tok == "<bos>" || tok == "<eos>") return true;
  return stopword_list().count(tok) > 0;
}

}  // namespace

Vocabulary::Vocabulary() {
  add("<unk>");
  add("<bos>");
  add("<eos>");
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const TokenId id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  stopword_.push_back(is_stopword_string(token));
  index_.emplace(token, id);
  return id;
}

TokenId Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::is_stopword(TokenId id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range");
  return stopword_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path.string());
  for (const auto& tok : tokens_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file: " + path.string());
  Vocabulary vocab;
  std::string line;
  TokenId expected = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw DataError("empty token at vocabulary line " +
                      std::to_string(expected + 1));
    }
    // File order must equal id order, specials first.
    if (vocab.add(line) != expected) {
      throw DataError("vocabulary line " + std::to_string(expected + 1) +
                      " is a duplicate or misplaced special: " + line);
    }
    ++expected;
  }
  return vocab;
}

namespace {

const std::array<std::string, 3> kSpecials = {"<unk>", "<bos>", "<eos>"};

}  // namespace

TokenSeq tokenize(const Vocabulary& vocab, const std::string& text) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    bool matched_special = false;
    for (const auto& sp : kSpecials) {
      if (text.compare(i, sp.size(), sp) == 0) {
        out.push_back(vocab.lookup(sp));
        i += sp.size();
        matched_special = true;
        break;
      }
    }
    if (matched_special) continue;
    if (std::isalnum(c)) {
      std::size_t j = i;
      std::string word;
      while (j < text.size() &&
             std::isalnum(static_cast<unsigned char>(text[j]))) {
        word.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(text[j]))));
        ++j;
      }
      out.push_back(vocab.lookup(word));
      i = j;
    } else {
      out.push_back(vocab.lookup(std::string(1, static_cast<char>(c))));
      ++i;
    }
  }
  return out;
}

std::string detokenize(const Vocabulary& vocab, const TokenSeq& tokens) {
  std::string out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k > 0) out.push_back(' ');
    out += vocab.token(tokens[k]);
  }
  return out;
}

}  // namespace crl
