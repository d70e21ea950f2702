#include "edittrace/llm_client.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace edittrace {

using nlohmann::json;

const char* to_string(ClientErrorKind kind) {
  switch (kind) {
    case ClientErrorKind::Timeout: return "Timeout";
    case ClientErrorKind::Connection: return "Connection";
    case ClientErrorKind::HttpStatus: return "HttpStatus";
    case ClientErrorKind::MalformedResponse: return "MalformedResponse";
    case ClientErrorKind::ScriptExhausted: return "ScriptExhausted";
    case ClientErrorKind::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

ClientConfig ClientConfig::from_env() {
  ClientConfig cfg;
  if (const char* url = std::getenv("EDITTRACE_LLM_URL")) cfg.endpoint_url = url;
  if (const char* key = std::getenv("EDITTRACE_LLM_KEY")) cfg.api_key = key;
  return cfg;
}

std::string encode_chat_request(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", request.user}});
  json body = {{"messages", messages},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  if (!model.empty()) body["model"] = model;
  return body.dump();
}

std::string decode_chat_response(const std::string& body) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded())
    throw ClientError(ClientErrorKind::MalformedResponse, "response body is not JSON");
  try {
    const json& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string())
      throw ClientError(ClientErrorKind::MalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ClientError(ClientErrorKind::MalformedResponse,
                      std::string("response lacks choices[0].message.content: ") + e.what());
  }
}

HttpLlmClient::HttpLlmClient(ClientConfig config) : config_(std::move(config)) {
  if (config_.timeout.count() <= 0)
    throw ClientError(ClientErrorKind::BadConfig, "timeout must be positive");
  if (config_.transport_retries < 0)
    throw ClientError(ClientErrorKind::BadConfig, "transport_retries must be >= 0");
  const std::string& url = config_.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ClientError(ClientErrorKind::BadConfig, "endpoint url needs a scheme: '" + url + "'");
  auto path_begin = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
}

std::uint64_t HttpLlmClient::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::string HttpLlmClient::attempt(const ChatRequest& request) const {
  httplib::Client cli(scheme_host_port_);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  if (!config_.api_key.empty()) cli.set_bearer_token_auth(config_.api_key);

  auto res = cli.Post(path_, encode_chat_request(request, config_.model), "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
      throw ClientError(ClientErrorKind::Timeout, "request timed out: " + httplib::to_string(err));
    throw ClientError(ClientErrorKind::Connection, "transport failure: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw ClientError(ClientErrorKind::HttpStatus,
                      "server returned HTTP " + std::to_string(res->status), res->status);
  return decode_chat_response(res->body);
}

namespace {

bool retryable(const ClientError& e) {
  switch (e.kind()) {
    case ClientErrorKind::Timeout:
    case ClientErrorKind::Connection:
      return true;
    case ClientErrorKind::HttpStatus:
      return e.http_status() >= 500 || e.http_status() == 429;
    default:
      return false;
  }
}

}  // namespace

std::string HttpLlmClient::complete(const ChatRequest& request) {
  if (request.user.empty()) throw std::invalid_argument("chat request has an empty user message");
  auto delay = config_.backoff_initial;
  for (int attempt_no = 0;; ++attempt_no) {
    {
      std::lock_guard lock(mu_);
      ++requests_;
    }
    try {
      return attempt(request);
    } catch (const ClientError& e) {
      if (!retryable(e) || attempt_no >= config_.transport_retries) throw;
    }
    double jitter;
    {
      // xorshift64; jitter only, quality is irrelevant
      std::lock_guard lock(mu_);
      rng_state_ ^= rng_state_ << 13;
      rng_state_ ^= rng_state_ >> 7;
      rng_state_ ^= rng_state_ << 17;
      jitter = static_cast<double>(rng_state_ >> 11) * 0x1.0p-53;
    }
    std::this_thread::sleep_for(delay + std::chrono::milliseconds(
                                            static_cast<long>(0.25 * jitter * delay.count())));
    delay *= 2;
  }
}

MockLlmClient::MockLlmClient(std::vector<std::string> script) : script_(std::move(script)) {}

std::string MockLlmClient::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  last_ = request;
  std::size_t index = calls_++;
  if (index >= script_.size())
    throw ClientError(ClientErrorKind::ScriptExhausted,
                      "mock script exhausted after " + std::to_string(script_.size()) + " replies");
  return script_[index];
}

std::size_t MockLlmClient::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::optional<ChatRequest> MockLlmClient::last_request() const {
  std::lock_guard lock(mu_);
  return last_;
}

}  // namespace edittrace
