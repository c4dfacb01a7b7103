#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tta::lm {

using TokenId = int;

// Fixed vocabulary. Layout convention:
//   ids 0..2   special tokens <unk>, <bos>, <eos>
//   then single-character tokens covering printable ASCII plus '\n' and '\t'
//   then multi-character word pieces.
// The single-character block is the byte fallback; any byte outside it
// encodes to <unk>.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kNumSpecial = 3;

  explicit Vocabulary(std::vector<std::string> tokens);

  // One token per line, with \\ \n \t \r escapes.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<TokenId> find(std::string_view text) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t longest_piece() const { return longest_; }

  static bool in_coverage(char c);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t longest_ = 1;
};

// Greedy longest-match word-piece encoder with single-character fallback.
class Tokenizer {
 public:
  explicit Tokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}

  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(const std::vector<TokenId>& ids) const;
  std::string decode_one(TokenId id) const;

  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  Vocabulary vocab_;
};

std::string escape_token(std::string_view token);
std::string unescape_token(std::string_view line);

}  // namespace tta::lm
