#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "recon/gateway.h"

namespace recon {
namespace {

using nlohmann::json;

bool LooksLikeOverflow(int status, const std::string& body) {
  if (status != 400 && status != 413) return false;
  return body.find("context_length_exceeded") != std::string::npos ||
         body.find("maximum context length") != std::string::npos ||
         body.find("prompt is too long") != std::string::npos;
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpProviderConfig config)
    : config_(std::move(config)) {}

std::string HttpChatProvider::Path() const {
  return config_.style == ApiStyle::kOpenAi ? "/v1/chat/completions"
                                            : "/v1/messages";
}

std::string HttpChatProvider::BuildBody(const ChatRequest& request,
                                        const std::string& model_name,
                                        double temperature) const {
  json body;
  body["model"] = model_name;
  body["temperature"] = temperature;
  if (config_.style == ApiStyle::kOpenAi) {
    json messages = json::array();
    for (const ChatMessage& m : request.messages) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    body["messages"] = std::move(messages);
  } else {
    std::string system;
    json messages = json::array();
    for (const ChatMessage& m : request.messages) {
      if (m.role == "system") {
        if (!system.empty()) system += "\n\n";
        system += m.content;
      } else {
        messages.push_back({{"role", m.role}, {"content", m.content}});
      }
    }
    if (!system.empty()) body["system"] = system;
    body["messages"] = std::move(messages);
    body["max_tokens"] = config_.max_output_tokens;
  }
  return body.dump();
}

ProviderReply HttpChatProvider::Complete(const ChatRequest& request,
                                         const std::string& model_name,
                                         double temperature) {
  std::string key;
  if (!config_.api_key_env.empty()) {
    if (const char* value = std::getenv(config_.api_key_env.c_str())) key = value;
  }
  httplib::Headers headers;
  if (config_.style == ApiStyle::kOpenAi) {
    headers.emplace("Authorization", "Bearer " + key);
  } else {
    headers.emplace("x-api-key", key);
    headers.emplace("anthropic-version", "2023-06-01");
  }
  const std::string body = BuildBody(request, model_name, temperature);
  spdlog::debug("POST {}{} (key from ${}: <redacted>) body={}",
                config_.base_url, Path(), config_.api_key_env, body);

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  const auto start = std::chrono::steady_clock::now();
  httplib::Result result = client.Post(Path(), headers, body, "application/json");
  const double latency_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();
  if (!result) {
    throw TransientProviderError("network error: " +
                                 httplib::to_string(result.error()));
  }
  spdlog::debug("response {} body={}", result->status, result->body);
  const int status = result->status;
  if (LooksLikeOverflow(status, result->body)) {
    throw ContextOverflowError("provider reported context overflow: " +
                               result->body.substr(0, 200));
  }
  if (status == 408 || status == 409 || status == 429 || status >= 500) {
    throw TransientProviderError("HTTP " + std::to_string(status));
  }
  if (status != 200) {
    throw std::runtime_error("provider rejected request: HTTP " +
                             std::to_string(status) + " " +
                             result->body.substr(0, 200));
  }

  const json parsed = json::parse(result->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw TransientProviderError("malformed provider response");
  }
  ProviderReply reply;
  reply.latency_ms = latency_ms;
  try {
    if (config_.style == ApiStyle::kOpenAi) {
      reply.text = parsed.at("choices").at(0).at("message").at("content");
      if (parsed.contains("usage")) {
        reply.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
        reply.completion_tokens = parsed["usage"].value("completion_tokens", 0);
      }
    } else {
      for (const json& block : parsed.at("content")) {
        if (block.value("type", "") == "text") reply.text += block.at("text");
      }
      if (parsed.contains("usage")) {
        reply.prompt_tokens = parsed["usage"].value("input_tokens", 0);
        reply.completion_tokens = parsed["usage"].value("output_tokens", 0);
      }
    }
  } catch (const json::exception& e) {
    throw TransientProviderError(std::string("unexpected response shape: ") +
                                 e.what());
  }
  return reply;
}

}  // namespace recon
