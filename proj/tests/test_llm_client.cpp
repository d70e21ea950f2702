#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "edittrace/llm_client.hpp"

using namespace edittrace;
using namespace std::chrono_literals;

namespace {

// Local chat-completions stand-in; the handler decides each reply.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  ClientConfig config() const {
    ClientConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    cfg.backoff_initial = 1ms;
    cfg.timeout = 2000ms;
    return cfg;
  }

  std::atomic<int> hits{0};
  std::string last_auth;
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

ChatRequest request(const std::string& user) {
  ChatRequest r;
  r.system = "sys";
  r.user = user;
  return r;
}

}  // namespace

TEST(MockClient, ReplaysScriptInOrder) {
  MockLlmClient mock({"a", "b"});
  EXPECT_EQ(mock.complete(request("x")), "a");
  EXPECT_EQ(mock.complete(request("y")), "b");
  EXPECT_EQ(mock.call_count(), 2u);
  EXPECT_EQ(mock.last_request()->user, "y");
}

TEST(MockClient, ExhaustedScriptThrows) {
  MockLlmClient empty({});
  try {
    empty.complete(request("x"));
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_EQ(e.kind(), ClientErrorKind::ScriptExhausted);
  }
  MockLlmClient one({"a"});
  EXPECT_EQ(one.complete(request("x")), "a");
  EXPECT_THROW(one.complete(request("x")), ClientError);
}

TEST(MockClient, Passthrough) {
  MockLlmClient mock({"the black cat sat"});
  EXPECT_EQ(mock.complete(request("edit")), "the black cat sat");
}

TEST(WireFormat, RequestShape) {
  auto body = nlohmann::json::parse(encode_chat_request(request("hello"), ""));
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "hello");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
  EXPECT_EQ(body["max_tokens"], 256);
  EXPECT_FALSE(body.contains("model"));
  EXPECT_EQ(nlohmann::json::parse(encode_chat_request(request("x"), "m1"))["model"], "m1");
}

TEST(WireFormat, ResponseDecoding) {
  EXPECT_EQ(decode_chat_response(completion("ok")), "ok");
  for (const char* bad : {"not json", "{}", R"({"choices":[]})", R"({"choices":[{"message":{"content":3}}]})"}) {
    try {
      decode_chat_response(bad);
      FAIL() << bad;
    } catch (const ClientError& e) {
      EXPECT_EQ(e.kind(), ClientErrorKind::MalformedResponse) << bad;
    }
  }
}

TEST(HttpClient, SuccessSendsBearerToken) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("the black cat sat"), "application/json");
  });
  auto cfg = server.config();
  cfg.api_key = "k-123";
  HttpLlmClient client(cfg);
  EXPECT_EQ(client.complete(request("edit")), "the black cat sat");
  EXPECT_EQ(server.last_auth, "Bearer k-123");
  EXPECT_EQ(nlohmann::json::parse(server.last_body)["messages"][1]["content"], "edit");
  EXPECT_EQ(client.request_count(), 1u);
}

TEST(HttpClient, ServerErrorRetriedThenReported) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  auto cfg = server.config();
  cfg.transport_retries = 2;
  HttpLlmClient client(cfg);
  try {
    client.complete(request("edit"));
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_EQ(e.kind(), ClientErrorKind::HttpStatus);
    EXPECT_EQ(e.http_status(), 500);
  }
  EXPECT_EQ(server.hits.load(), 3);
}

TEST(HttpClient, TransientFailureRecovers) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    static std::atomic<int> calls{0};
    if (calls++ == 0) res.status = 503;
    else res.set_content(completion("done"), "application/json");
  });
  HttpLlmClient client(server.config());
  EXPECT_EQ(client.complete(request("edit")), "done");
  EXPECT_EQ(server.hits.load(), 2);
}

TEST(HttpClient, ClientErrorsAreNotRetried) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  HttpLlmClient client(server.config());
  EXPECT_THROW(client.complete(request("edit")), ClientError);
  EXPECT_EQ(server.hits.load(), 1);
}

TEST(HttpClient, NonJsonBodyIsMalformed) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>oops</html>", "text/html");
  });
  HttpLlmClient client(server.config());
  try {
    client.complete(request("edit"));
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_EQ(e.kind(), ClientErrorKind::MalformedResponse);
  }
  EXPECT_EQ(server.hits.load(), 1);
}

TEST(HttpClient, SlowServerTimesOutWithinBudget) {
  FakeServer server([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(400ms);
    res.set_content(completion("late"), "application/json");
  });
  auto cfg = server.config();
  cfg.timeout = 100ms;
  cfg.transport_retries = 1;
  HttpLlmClient client(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    client.complete(request("edit"));
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_EQ(e.kind(), ClientErrorKind::Timeout);
  }
  // timeout x (retries + 1) plus the backoff, with scheduling slack
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 1000ms);
}

TEST(HttpClient, UnreachableHostIsConnectionError) {
  ClientConfig cfg;
  cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
  cfg.transport_retries = 0;
  cfg.timeout = 500ms;
  HttpLlmClient client(cfg);
  try {
    client.complete(request("edit"));
    FAIL();
  } catch (const ClientError& e) {
    EXPECT_TRUE(e.kind() == ClientErrorKind::Connection || e.kind() == ClientErrorKind::Timeout);
  }
}

TEST(HttpClient, BadConfigRejected) {
  ClientConfig cfg;
  cfg.endpoint_url = "no-scheme";
  EXPECT_THROW(HttpLlmClient{cfg}, ClientError);
  cfg.endpoint_url = "http://x";
  cfg.timeout = 0ms;
  EXPECT_THROW(HttpLlmClient{cfg}, ClientError);
}

TEST(ClientConfig, ReadsEnvironment) {
  ::setenv("EDITTRACE_LLM_URL", "http://example.invalid/v1/chat/completions", 1);
  ::setenv("EDITTRACE_LLM_KEY", "secret", 1);
  auto cfg = ClientConfig::from_env();
  EXPECT_EQ(cfg.endpoint_url, "http://example.invalid/v1/chat/completions");
  EXPECT_EQ(cfg.api_key, "secret");
  ::unsetenv("EDITTRACE_LLM_URL");
  ::unsetenv("EDITTRACE_LLM_KEY");
  EXPECT_TRUE(ClientConfig::from_env().endpoint_url.empty());
}
