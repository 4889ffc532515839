#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "r2d/tensor/ops.hpp"

namespace r2d::seq2seq {

using TokenId = tensor::ClassId;
using TokenSeq = std::vector<TokenId>;

/// Splits on whitespace; every ASCII punctuation character is a token of its own.
std::vector<std::string> split_tokens(std::string_view text);

/// Word-level vocabulary with fixed reserved ids.
///
/// Ids 0..3 are <pad>, <bos>, <eos>, <unk>; the prompt words follow at fixed
/// positions so that checkpoints agree on them. Corpus tokens come after the
/// reserved block in lexicographic order.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;

  static const std::vector<std::string>& reserved_tokens();

  Vocab();
  static Vocab build(std::span<const std::string> texts);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  TokenSeq encode(std::string_view text) const;
  /// Joins tokens with single spaces; <pad>, <bos> and <eos> are dropped.
  std::string decode(std::span<const TokenId> ids) const;

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> ids_;
};

}  // namespace r2d::seq2seq
