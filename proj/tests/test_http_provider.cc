// Wire-format tests against a local httplib server standing in for the
// provider endpoint.

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "recon/gateway.h"

namespace recon {
namespace {

using nlohmann::json;

class MockEndpoint {
 public:
  explicit MockEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", handler);
    server_.Post("/v1/messages", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ChatRequest SampleRequest() {
  ChatRequest request;
  request.messages = {{"system", "rules"}, {"user", "your move"}};
  return request;
}

TEST(HttpProviderTest, OpenAiWireFormat) {
  json seen;
  std::string auth;
  MockEndpoint endpoint([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"[approve]"}}],
                       "usage":{"prompt_tokens":12,"completion_tokens":3}})",
                    "application/json");
  });
  setenv("RECON_TEST_OPENAI_KEY", "sk-test", 1);
  HttpChatProvider provider(
      {ApiStyle::kOpenAi, endpoint.url(), "RECON_TEST_OPENAI_KEY", 256});
  const ProviderReply reply = provider.Complete(SampleRequest(), "gpt-x", 0.6);
  EXPECT_EQ(reply.text, "[approve]");
  EXPECT_EQ(reply.prompt_tokens, 12);
  EXPECT_EQ(reply.completion_tokens, 3);
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen["model"], "gpt-x");
  EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.6);
  ASSERT_EQ(seen["messages"].size(), 2u);
  EXPECT_EQ(seen["messages"][0]["role"], "system");
  EXPECT_EQ(seen["messages"][1]["content"], "your move");
}

TEST(HttpProviderTest, AnthropicWireFormat) {
  json seen;
  std::string key;
  MockEndpoint endpoint([&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    key = req.get_header_value("x-api-key");
    res.set_content(R"({"content":[{"type":"text","text":"Thought: a"},
                                   {"type":"text","text":"\nSpeech: b"}],
                       "usage":{"input_tokens":20,"output_tokens":5}})",
                    "application/json");
  });
  setenv("RECON_TEST_ANTHROPIC_KEY", "ak-test", 1);
  HttpChatProvider provider(
      {ApiStyle::kAnthropic, endpoint.url(), "RECON_TEST_ANTHROPIC_KEY", 300});
  const ProviderReply reply = provider.Complete(SampleRequest(), "claude-x", 1.0);
  EXPECT_EQ(reply.text, "Thought: a\nSpeech: b");
  EXPECT_EQ(reply.prompt_tokens, 20);
  EXPECT_EQ(key, "ak-test");
  EXPECT_EQ(seen["system"], "rules");
  EXPECT_EQ(seen["max_tokens"], 300);
  ASSERT_EQ(seen["messages"].size(), 1u);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
}

TEST(HttpProviderTest, StatusClassification) {
  int status = 500;
  std::string body = "{}";
  MockEndpoint endpoint([&](const httplib::Request&, httplib::Response& res) {
    res.status = status;
    res.set_content(body, "application/json");
  });
  HttpChatProvider provider({ApiStyle::kOpenAi, endpoint.url(), "", 64});

  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), TransientProviderError);
  status = 429;
  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), TransientProviderError);
  status = 400;
  body = R"({"error":{"code":"context_length_exceeded"}})";
  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), ContextOverflowError);
  status = 401;
  body = R"({"error":"bad key"})";
  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), std::runtime_error);
  status = 200;
  body = "not json";
  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), TransientProviderError);
}

TEST(HttpProviderTest, GatewayRetriesThroughHttp) {
  int calls = 0;
  MockEndpoint endpoint([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"fine"}}]})",
                    "application/json");
  });
  auto provider = std::make_shared<HttpChatProvider>(
      HttpProviderConfig{ApiStyle::kOpenAi, endpoint.url(), "", 64});
  ModelProfile profile{"p", "m", 0.6, 4096, std::nullopt};
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile), {},
                  [](auto) {});
  const ChatResponse r = gateway.Complete(SampleRequest(), profile);
  EXPECT_EQ(r.text, "fine");
  EXPECT_EQ(r.attempt_count, 3);
}

TEST(HttpProviderTest, UnreachableHostIsTransient) {
  HttpChatProvider provider({ApiStyle::kOpenAi, "http://127.0.0.1:1", "", 64,
                             std::chrono::seconds(2)});
  EXPECT_THROW(provider.Complete(SampleRequest(), "m", 0), TransientProviderError);
}

}  // namespace
}  // namespace recon
