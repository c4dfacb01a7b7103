#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <boost/regex.hpp>
#include <nlohmann/json.hpp>

#include "tta/llm/backend.hpp"

namespace tta::llm {

// Deterministic policy: the first entry whose pattern is found in the
// rendered transcript answers. Patterns are Perl-style regexes where '.'
// does not cross newlines; responses may reference groups as $1..$9 ($$ is
// a literal dollar). With "escape": "json" the substituted groups are
// escaped for embedding inside a JSON string. The last entry must be a
// catch-all with an empty pattern; a null response there means "no match".
class ScriptedBackend final : public Backend {
 public:
  struct Entry {
    std::string pattern;
    std::optional<std::string> response;
    bool json_escape = false;
    boost::regex regex;
  };

  explicit ScriptedBackend(std::vector<Entry> entries, std::string model_id = "scripted");
  static std::unique_ptr<ScriptedBackend> load(const std::filesystem::path& path);
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& policy);

  BackendKind kind() const override { return BackendKind::Scripted; }
  std::string model_id() const override { return model_id_; }
  std::string complete(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides = {}) override;

  // Every transcript seen so far, in call order.
  std::vector<std::string> transcripts() const;

 private:
  std::vector<Entry> entries_;
  std::string model_id_;
  mutable std::mutex mu_;
  std::vector<std::string> seen_;
};

// Substitutes $N references in a response template.
std::string expand_response(const std::string& tmpl, const boost::smatch& match, bool json_escape);

}  // namespace tta::llm
