#include "r2d/seq2seq/vocab.hpp"

#include <cctype>
#include <fstream>
#include <set>

#include "r2d/errors.hpp"

namespace r2d::seq2seq {

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return out;
}

const std::vector<std::string>& Vocab::reserved_tokens() {
  static const std::vector<std::string> reserved{
      "<pad>", "<bos>", "<eos>", "<unk>", "predict", "explain", "given", "label", ":", ","};
  return reserved;
}

Vocab::Vocab() {
  for (const auto& t : reserved_tokens()) add(t);
}

void Vocab::add(const std::string& token) {
  if (ids_.contains(token)) return;
  ids_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& text : texts) {
    for (auto& t : split_tokens(text)) words.insert(std::move(t));
  }
  Vocab v;
  for (const auto& w : words) v.add(w);
  return v;
}

bool Vocab::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

TokenSeq Vocab::encode(std::string_view text) const {
  TokenSeq out;
  for (const auto& t : split_tokens(text)) out.push_back(id(t));
  return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

nlohmann::json Vocab::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = i;
  return j;
}

Vocab Vocab::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("vocabulary must be a JSON object of token -> id");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& [token, value] : j.items()) {
    if (!value.is_number_unsigned()) throw FormatError("vocabulary id for '" + token + "' is not an unsigned integer");
    const auto id = value.get<std::size_t>();
    if (id >= tokens.size() || seen[id]) {
      throw FormatError("vocabulary ids are not a bijection onto 0.." +
                        std::to_string(tokens.size() - 1));
    }
    seen[id] = true;
    tokens[id] = token;
  }
  const auto& reserved = reserved_tokens();
  for (std::size_t i = 0; i < reserved.size(); ++i) {
    if (i >= tokens.size() || tokens[i] != reserved[i]) {
      throw FormatError("reserved token '" + reserved[i] + "' is not at id " + std::to_string(i));
    }
  }
  Vocab v;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace r2d::seq2seq
