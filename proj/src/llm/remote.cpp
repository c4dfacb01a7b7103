#include "tta/llm/remote.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tta/errors.hpp"
#include "tta/util.hpp"

namespace tta::llm {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

bool is_transient_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

HttplibTransport::HttplibTransport(std::string endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {}

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body,
                                    const std::map<std::string, std::string>& headers) {
  httplib::Client client(endpoint_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

RecordingTransport::RecordingTransport(std::unique_ptr<HttpTransport> inner, const std::filesystem::path& tape)
    : inner_(std::move(inner)) {
  if (tape.has_parent_path()) std::filesystem::create_directories(tape.parent_path());
  out_.open(tape, std::ios::binary | std::ios::app);
  if (!out_) throw ConfigError("cannot open tape " + tape.string());
}

HttpResponse RecordingTransport::post(const std::string& path, const std::string& body,
                                      const std::map<std::string, std::string>& headers) {
  HttpResponse res = inner_->post(path, body, headers);
  ojson line;
  line["request"] = {{"path", path}, {"body", body}};
  line["response"] = {{"status", res.status}, {"body", res.body}};
  std::lock_guard lock(mu_);
  out_ << line.dump() << '\n';
  out_.flush();
  return res;
}

ReplayTransport::ReplayTransport(const std::filesystem::path& tape) {
  const std::string text = read_file(tape);
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      tape_.push_back({j.at("request").at("path").get<std::string>(), j.at("request").at("body").get<std::string>(),
                       {j.at("response").at("status").get<int>(), j.at("response").at("body").get<std::string>()}});
    } catch (const json::exception& e) {
      throw FormatError("bad tape line in " + tape.string() + ": " + e.what());
    }
  }
}

HttpResponse ReplayTransport::post(const std::string& path, const std::string& body,
                                   const std::map<std::string, std::string>&) {
  std::lock_guard lock(mu_);
  if (next_ >= tape_.size()) throw TransportError("replay tape exhausted");
  const auto& ex = tape_[next_];
  if (ex.path != path || ex.body != body) {
    throw TransportError("request " + std::to_string(next_) + " does not match the replay tape");
  }
  ++next_;
  return ex.response;
}

std::size_t ReplayTransport::remaining() const {
  std::lock_guard lock(mu_);
  return tape_.size() - next_;
}

RemoteBackend::RemoteBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(std::clamp<std::ptrdiff_t>(config_.concurrency, 1, kMaxConcurrency)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); };
}

std::string RemoteBackend::request_body(const std::vector<ChatMessage>& messages,
                                        const CompletionOverrides& overrides) const {
  ojson body;
  body["model"] = config_.model_id;
  body["messages"] = ojson::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["temperature"] = overrides.temperature.value_or(config_.temperature);
  body["max_tokens"] = overrides.max_tokens.value_or(config_.max_tokens);
  body["seed"] = overrides.seed.value_or(config_.seed);
  return body.dump();
}

std::string RemoteBackend::parse_reply(const std::string& body) {
  try {
    const json j = json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string{} : content.get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completions reply: ") + e.what());
  }
}

std::string RemoteBackend::complete(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides) {
  if (messages.empty()) throw ConfigError("complete needs at least one message");
  const std::string body = request_body(messages, overrides);
  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(config_.credential_env.c_str()); key && *key) {
    headers["Authorization"] = std::string("Bearer ") + key;
  }

  HttpResponse last;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    in_flight_.acquire();
    try {
      last = transport_->post(config_.path, body, headers);
    } catch (...) {
      in_flight_.release();
      throw;
    }
    in_flight_.release();
    if (last.status == 200) return parse_reply(last.body);
    if (!is_transient_status(last.status)) break;
    if (attempt < config_.retry.max_attempts) {
      const double wait = config_.retry.backoff_seconds * static_cast<double>(1 << (attempt - 1));
      sleeper_(std::chrono::milliseconds(static_cast<long long>(wait * 1000.0)));
    }
  }
  throw TransportError("chat completion failed with status " + std::to_string(last.status) + ": " +
                       last.body.substr(0, 200));
}

}  // namespace tta::llm
