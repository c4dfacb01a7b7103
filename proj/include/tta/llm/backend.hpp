#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/adapt/adaptation.hpp"

namespace tta::llm {

enum class Role { System, User, Assistant };

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// The transcript both the local model and scripted matchers see:
//   <|system|>\n{content}\n<|user|>\n{content}\n ... <|assistant|>\n
std::string render_transcript(const std::vector<ChatMessage>& messages);

enum class BackendKind { Local, Remote, Scripted };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

struct RetryConfig {
  int max_attempts = 3;
  double backoff_seconds = 1.0;  // doubled after every failed attempt
};

enum class TapeMode { Off, Record, Replay };

struct BackendConfig {
  BackendKind kind = BackendKind::Scripted;
  std::string model_id = "tiny-local";
  double temperature = 0.0;
  std::uint64_t seed = 0;
  int max_tokens = 64;

  // remote
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string credential_env = "OPENAI_API_KEY";
  RetryConfig retry;
  int concurrency = 4;
  double timeout_seconds = 60.0;
  TapeMode tape_mode = TapeMode::Off;
  std::filesystem::path tape_path;

  // local; empty paths fall back to the bundled tiny model
  std::filesystem::path model_path;
  std::filesystem::path vocab_path;

  // scripted
  std::filesystem::path script_path;

  // Throws ConfigError. Remote configs need an endpoint unless replaying a tape.
  void validate() const;

  // Relative paths are resolved against base_dir.
  static BackendConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

struct CompletionOverrides {
  std::optional<double> temperature;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_tokens;
};

struct AdaptedCompletion {
  std::string text;
  adapt::AdaptationVector delta;
  adapt::UpdateReport report;
};

// A policy backend. Implementations are safe to call from several threads.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const = 0;
  virtual std::string model_id() const = 0;

  // Throws CapacityError, TransportError or ScriptedPolicyError.
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const CompletionOverrides& overrides = {}) = 0;

  // Generation with the adaptation vector added to every hidden state.
  // UnsupportedOperationError unless the backend runs the model locally.
  virtual std::string complete_adapted(const std::vector<ChatMessage>& messages,
                                       const adapt::AdaptationVector& delta,
                                       const CompletionOverrides& overrides = {});

  // Updates delta on the rendered prompt, then generates with the result.
  virtual AdaptedCompletion adapt_and_complete(const std::vector<ChatMessage>& messages,
                                               const adapt::AdaptationVector& delta,
                                               const adapt::AdaptationConfig& config,
                                               const CompletionOverrides& overrides = {});

  // Whether the rendered prompt plus the generation budget fits the model.
  // Backends without a known limit always return true.
  virtual bool fits(const std::vector<ChatMessage>& messages,
                    const CompletionOverrides& overrides = {}) const;

  // Hidden size of the adaptation vector, or 0 when adaptation is unsupported.
  virtual std::size_t adaptation_dim() const { return 0; }
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

}  // namespace tta::llm
