#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "crl/types.hpp"

namespace crl {

// Token inventory with three reserved ids. Tokens are lowercase words,
// single punctuation characters, or the literal specials below. Stopword
// status (articles, conjunctions, punctuation, specials) is fixed per token
// at insertion; content tokens are everything else.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;

  Vocabulary();

  // Inserts the token if absent; returns its id either way.
  TokenId add(const std::string& token);

  // kUnk when the token is unknown.
  TokenId lookup(const std::string& token) const;

  const std::string& token(TokenId id) const;
  bool is_stopword(TokenId id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<bool> stopword_;
  std::unordered_map<std::string, TokenId> index_;
};

// Lowercases, splits on whitespace and punctuation (punctuation characters
// become single-character tokens), and maps unknown words to kUnk. The
// literal specials <unk>/<bos>/<eos> are kept atomic.
TokenSeq tokenize(const Vocabulary& vocab, const std::string& text);

// Space-joined token strings; inverse of tokenize on normalized text.
std::string detokenize(const Vocabulary& vocab, const TokenSeq& tokens);

}  // namespace crl
