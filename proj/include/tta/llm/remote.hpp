#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "tta/llm/backend.hpp"

namespace tta::llm {

struct HttpResponse {
  int status = 0;  // 0 when no response arrived (connect failure, timeout)
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string endpoint, double timeout_seconds);
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  std::string endpoint_;
  double timeout_seconds_;
};

// Appends one JSONL line per exchange: {"request":{"path","body"},"response":{"status","body"}}.
// Headers are never written.
class RecordingTransport final : public HttpTransport {
 public:
  RecordingTransport(std::unique_ptr<HttpTransport> inner, const std::filesystem::path& tape);
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  std::unique_ptr<HttpTransport> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

// Serves recorded exchanges in order. A request whose path or body differs
// from the tape raises TransportError.
class ReplayTransport final : public HttpTransport {
 public:
  explicit ReplayTransport(const std::filesystem::path& tape);
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;
  std::size_t remaining() const;

 private:
  struct Exchange {
    std::string path;
    std::string body;
    HttpResponse response;
  };
  mutable std::mutex mu_;
  std::vector<Exchange> tape_;
  std::size_t next_ = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Chat-completions client. Request body:
//   {"model","messages":[{"role","content"}],"temperature","max_tokens","seed"}
// Reply text is read from choices[0].message.content.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport, Sleeper sleeper = {});

  BackendKind kind() const override { return BackendKind::Remote; }
  std::string model_id() const override { return config_.model_id; }
  std::string complete(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides = {}) override;

  std::string request_body(const std::vector<ChatMessage>& messages, const CompletionOverrides& overrides) const;
  static std::string parse_reply(const std::string& body);

 private:
  static constexpr std::ptrdiff_t kMaxConcurrency = 64;

  BackendConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::counting_semaphore<kMaxConcurrency> in_flight_;
};

bool is_transient_status(int status);

}  // namespace tta::llm
