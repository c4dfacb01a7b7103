#include "tta/llm/scripted.hpp"

#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::llm {

using json = nlohmann::json;

std::string expand_response(const std::string& tmpl, const boost::smatch& match, bool json_escape) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '$' && i + 1 < tmpl.size()) {
      const char n = tmpl[i + 1];
      if (n == '$') {
        out += '$';
        ++i;
        continue;
      }
      if (n >= '0' && n <= '9') {
        const auto group = static_cast<std::size_t>(n - '0');
        std::string value = group < match.size() && match[group].matched ? match[group].str() : std::string{};
        if (json_escape) {
          value = json(value).dump();
          value = value.substr(1, value.size() - 2);
        }
        out += value;
        ++i;
        continue;
      }
    }
    out += c;
  }
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<Entry> entries, std::string model_id)
    : entries_(std::move(entries)), model_id_(std::move(model_id)) {
  if (entries_.empty() || !entries_.back().pattern.empty()) {
    throw FormatError("scripted policy must end with a catch-all entry (empty match pattern)");
  }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& policy) {
  std::vector<Entry> entries;
  const json& list = policy.is_array() ? policy : policy.at("entries");
  for (const auto& e : list) {
    Entry entry;
    entry.pattern = e.at("match").get<std::string>();
    if (!e.at("response").is_null()) entry.response = e["response"].get<std::string>();
    const std::string escape = e.value("escape", "");
    if (!escape.empty() && escape != "json") throw FormatError("unknown escape mode '" + escape + "'");
    entry.json_escape = escape == "json";
    try {
      entry.regex = boost::regex(entry.pattern, boost::regex::perl);
    } catch (const boost::regex_error& err) {
      throw FormatError("bad scripted pattern '" + entry.pattern + "': " + err.what());
    }
    entries.push_back(std::move(entry));
  }
  const std::string id = policy.is_object() ? policy.value("model_id", "scripted") : "scripted";
  return std::make_unique<ScriptedBackend>(std::move(entries), id);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string ScriptedBackend::complete(const std::vector<ChatMessage>& messages, const CompletionOverrides&) {
  if (messages.empty()) throw ConfigError("complete needs at least one message");
  const std::string transcript = render_transcript(messages);
  {
    std::lock_guard lock(mu_);
    seen_.push_back(transcript);
  }
  for (const auto& entry : entries_) {
    boost::smatch m;
    if (!boost::regex_search(transcript, m, entry.regex, boost::match_not_dot_newline)) continue;
    if (!entry.response) break;
    return expand_response(*entry.response, m, entry.json_escape);
  }
  throw ScriptedPolicyError("no scripted response matches the transcript");
}

std::vector<std::string> ScriptedBackend::transcripts() const {
  std::lock_guard lock(mu_);
  return seen_;
}

}  // namespace tta::llm
