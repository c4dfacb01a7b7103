#include "tta/lm/tokenizer.hpp"

#include <algorithm>
#include <fstream>

#include "tta/errors.hpp"

namespace tta::lm {

namespace {

constexpr std::string_view kUnkText = "\xEF\xBF\xBD";  // U+FFFD

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecial || tokens_[kUnk] != "<unk>" || tokens_[kBos] != "<bos>" ||
      tokens_[kEos] != "<eos>") {
    throw FormatError("vocabulary must start with <unk>, <bos>, <eos>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw FormatError("vocabulary: empty token at id " + std::to_string(i));
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw FormatError("vocabulary: duplicate token '" + escape_token(tokens_[i]) + "' at id " +
                        std::to_string(i));
    }
    if (i >= kNumSpecial) longest_ = std::max(longest_, tokens_[i].size());
  }
  for (char c = 0x20; c < 0x7f; ++c) {
    if (!index_.contains(std::string(1, c))) {
      throw FormatError(std::string("vocabulary: missing fallback token for byte '") + c + "'");
    }
  }
  if (!index_.contains("\n") || !index_.contains("\t")) {
    throw FormatError("vocabulary: missing fallback token for newline or tab");
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(unescape_token(line));
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << escape_token(t) << '\n';
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::in_coverage(char c) {
  return (c >= 0x20 && c < 0x7f) || c == '\n' || c == '\t';
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t max_len = std::min(vocab_.longest_piece(), text.size() - pos);
    bool matched = false;
    for (std::size_t len = max_len; len >= 1; --len) {
      if (auto id = vocab_.find(text.substr(pos, len)); id && *id >= TokenId(Vocabulary::kNumSpecial)) {
        ids.push_back(*id);
        pos += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      ids.push_back(Vocabulary::kUnk);
      ++pos;
    }
  }
  return ids;
}

std::string Tokenizer::decode_one(TokenId id) const {
  if (id == Vocabulary::kUnk) return std::string(kUnkText);
  if (id == Vocabulary::kBos || id == Vocabulary::kEos) return {};
  return vocab_.token(id);
}

std::string Tokenizer::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (TokenId id : ids) out += decode_one(id);
  return out;
}

std::string escape_token(std::string_view token) {
  std::string out;
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_token(std::string_view line) {
  std::string out;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\' || i + 1 == line.size()) {
      out += line[i];
      continue;
    }
    switch (line[++i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default: throw FormatError("vocabulary: bad escape in line '" + std::string(line) + "'");
    }
  }
  return out;
}

}  // namespace tta::lm
