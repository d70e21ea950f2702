#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edittrace {

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.7;
  int max_tokens = 256;
};

struct ClientConfig {
  std::string endpoint_url;  // full URL of the chat-completions endpoint
  std::string api_key;       // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
  int transport_retries = 3;
  // First backoff delay; doubles on each retry, with up to 25% jitter.
  std::chrono::milliseconds backoff_initial{1000};
  std::string model;  // optional "model" field in the request body

  // Reads EDITTRACE_LLM_URL / EDITTRACE_LLM_KEY. Missing URL leaves it empty.
  static ClientConfig from_env();
};

enum class ClientErrorKind { Timeout, Connection, HttpStatus, MalformedResponse, ScriptExhausted, BadConfig };

class ClientError : public std::runtime_error {
 public:
  ClientError(ClientErrorKind kind, std::string message, int http_status = 0)
      : std::runtime_error(std::move(message)), kind_(kind), http_status_(http_status) {}

  ClientErrorKind kind() const { return kind_; }
  int http_status() const { return http_status_; }

 private:
  ClientErrorKind kind_;
  int http_status_;
};

const char* to_string(ClientErrorKind kind);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Chat-completions client over HTTP(S). Each call opens its own connection,
/// so one instance may be shared by every worker thread.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(ClientConfig config);

  std::string complete(const ChatRequest& request) override;

  std::uint64_t request_count() const;

 private:
  std::string attempt(const ChatRequest& request) const;

  ClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::mutex mu_;
  std::uint64_t requests_ = 0;
  std::uint64_t rng_state_ = 0x9E3779B97F4A7C15ull;
};

/// Replays a fixed script of replies, one per call, then throws
/// ClientError{ScriptExhausted}.
class MockLlmClient : public LlmClient {
 public:
  explicit MockLlmClient(std::vector<std::string> script);

  std::string complete(const ChatRequest& request) override;

  std::size_t call_count() const;
  std::optional<ChatRequest> last_request() const;

 private:
  std::vector<std::string> script_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::optional<ChatRequest> last_;
};

// Request/response bodies in the interoperable chat-completions shape.
std::string encode_chat_request(const ChatRequest& request, const std::string& model);
// Throws ClientError{MalformedResponse} unless body has choices[0].message.content.
std::string decode_chat_response(const std::string& body);

}  // namespace edittrace
