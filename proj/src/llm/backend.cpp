#include "tta/llm/backend.hpp"

#include <cstdlib>

#include "tta/errors.hpp"
#include "tta/llm/local.hpp"
#include "tta/llm/remote.hpp"
#include "tta/llm/scripted.hpp"

namespace tta::llm {

using json = nlohmann::json;

std::string to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw FormatError("unknown chat role '" + s + "'");
}

std::string render_transcript(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (const auto& m : messages) {
    out += "<|" + to_string(m.role) + "|>\n";
    out += m.content;
    out += '\n';
  }
  out += "<|assistant|>\n";
  return out;
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Local: return "local";
    case BackendKind::Remote: return "remote";
    case BackendKind::Scripted: return "scripted";
  }
  return "?";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "local") return BackendKind::Local;
  if (s == "remote") return BackendKind::Remote;
  if (s == "scripted") return BackendKind::Scripted;
  throw ConfigError("unknown backend kind '" + s + "' (expected local, remote or scripted)");
}

void BackendConfig::validate() const {
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  if (kind == BackendKind::Remote) {
    if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    if (retry.backoff_seconds < 0.0) throw ConfigError("retry.backoff_seconds must be >= 0");
    if (concurrency < 1) throw ConfigError("concurrency must be at least 1");
    if (tape_mode != TapeMode::Replay) {
      if (endpoint.empty()) throw ConfigError("remote backend requires an endpoint");
      if (credential_env.empty()) throw ConfigError("remote backend requires credential_env");
    }
    if (tape_mode != TapeMode::Off && tape_path.empty()) throw ConfigError("tape mode set without tape_path");
  }
  if (kind == BackendKind::Scripted && script_path.empty()) throw ConfigError("scripted backend requires script");
}

BackendConfig BackendConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return (path.is_absolute() || base_dir.empty()) ? path : base_dir / path;
  };
  BackendConfig c;
  try {
    c.kind = backend_kind_from_string(j.at("kind").get<std::string>());
    c.model_id = j.value("model_id", c.kind == BackendKind::Local ? "tiny-local" : to_string(c.kind));
    c.temperature = j.value("temperature", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.endpoint = j.value("endpoint", "");
    c.path = j.value("path", c.path);
    c.credential_env = j.value("credential_env", c.credential_env);
    if (j.contains("retry")) {
      c.retry.max_attempts = j["retry"].value("max_attempts", c.retry.max_attempts);
      c.retry.backoff_seconds = j["retry"].value("backoff_seconds", c.retry.backoff_seconds);
    }
    c.concurrency = j.value("concurrency", c.concurrency);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    const std::string tape = j.value("tape_mode", "off");
    if (tape == "off") c.tape_mode = TapeMode::Off;
    else if (tape == "record") c.tape_mode = TapeMode::Record;
    else if (tape == "replay") c.tape_mode = TapeMode::Replay;
    else throw ConfigError("tape_mode must be off, record or replay");
    c.tape_path = resolve(j.value("tape_path", ""));
    c.model_path = resolve(j.value("model_path", ""));
    c.vocab_path = resolve(j.value("vocab_path", ""));
    c.script_path = resolve(j.value("script", ""));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("backend config: ") + e.what());
  }
  c.validate();
  return c;
}

json BackendConfig::to_json() const {
  json j{{"kind", to_string(kind)},
         {"model_id", model_id},
         {"temperature", temperature},
         {"seed", seed},
         {"max_tokens", max_tokens}};
  if (kind == BackendKind::Remote) {
    j["endpoint"] = endpoint;
    j["path"] = path;
    j["credential_env"] = credential_env;
    j["retry"] = {{"max_attempts", retry.max_attempts}, {"backoff_seconds", retry.backoff_seconds}};
    j["concurrency"] = concurrency;
  }
  if (kind == BackendKind::Local) {
    j["model_path"] = model_path.string();
    j["vocab_path"] = vocab_path.string();
  }
  if (kind == BackendKind::Scripted) j["script"] = script_path.string();
  return j;
}

std::string Backend::complete_adapted(const std::vector<ChatMessage>&, const adapt::AdaptationVector&,
                                      const CompletionOverrides&) {
  throw UnsupportedOperationError("complete_adapted requires the local backend, not " + to_string(kind()));
}

AdaptedCompletion Backend::adapt_and_complete(const std::vector<ChatMessage>&, const adapt::AdaptationVector&,
                                              const adapt::AdaptationConfig&, const CompletionOverrides&) {
  throw UnsupportedOperationError("test-time adaptation requires the local backend, not " + to_string(kind()));
}

bool Backend::fits(const std::vector<ChatMessage>&, const CompletionOverrides&) const { return true; }

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::Local:
      return LocalBackend::load(config);
    case BackendKind::Scripted:
      return ScriptedBackend::load(config.script_path);
    case BackendKind::Remote: {
      std::unique_ptr<HttpTransport> transport;
      if (config.tape_mode == TapeMode::Replay) {
        transport = std::make_unique<ReplayTransport>(config.tape_path);
      } else {
        const char* key = std::getenv(config.credential_env.c_str());
        if (!key || !*key) {
          throw ConfigError("credential environment variable " + config.credential_env + " is not set");
        }
        transport = std::make_unique<HttplibTransport>(config.endpoint, config.timeout_seconds);
        if (config.tape_mode == TapeMode::Record) {
          transport = std::make_unique<RecordingTransport>(std::move(transport), config.tape_path);
        }
      }
      return std::make_unique<RemoteBackend>(config, std::move(transport));
    }
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace tta::llm
