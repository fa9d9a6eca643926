// Chat-completion access for agents and the judge.
//
// The Gateway routes each pipeline stage to a ModelProfile, switches to the
// profile's long-context model when a request would overflow the short one,
// and retries transient provider failures with exponential backoff.
// Providers are pluggable: HttpChatProvider talks to real endpoints and
// ScriptedProvider replays a fixed script for tests and offline runs.

#pragma once

#include <chrono>
#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "recon/game_core.h"

namespace recon {

enum class ModelStage { kFormulation, kRefinement, kJudge, kBaseline };
std::string_view ModelStageName(ModelStage stage);
std::optional<ModelStage> ModelStageFromName(std::string_view name);

struct LongContextVariant {
  std::string model_name;
  int context_limit = 0;

  bool operator==(const LongContextVariant&) const = default;
};

struct ModelProfile {
  std::string provider_id;
  std::string model_name;
  double temperature = 0.6;
  int short_context_limit = 4096;
  std::optional<LongContextVariant> long_context;

  std::vector<std::string> Validate() const;
  bool operator==(const ModelProfile&) const = default;
};

using StageModelMap = std::map<ModelStage, ModelProfile>;

// Weaker model for formulation, stronger for refinement and judging.
StageModelMap DefaultStageModelMap();
// Every stage on the same profile.
StageModelMap UniformStageModelMap(const ModelProfile& profile);

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// Metadata that travels with a request. Real providers ignore it; scripted
// providers key on it.
struct RequestTag {
  Seat seat = 0;
  std::string stage;   // "first_order", "think", "speak", ...
  int turn = 0;        // per-seat act counter
  std::string phase;   // "propose", "discuss", ...
  int attempt = 0;     // re-prompt index within one stage
  std::string schema;  // JSON action descriptor for decision phases
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  RequestTag tag;

  std::string Joined() const;  // all message contents, for inspection
};

struct ProviderReply {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
};

struct ChatResponse {
  std::string text;
  std::string model_name;
  bool used_long_context = false;
  int attempt_count = 0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
};

// Thrown by providers for failures worth retrying (network, 429, 5xx).
class TransientProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown by providers when the model rejects the request as too long.
class ContextOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GatewayErrorKind { kExhausted, kOverflow, kUnmappedStage, kUnknownProvider };

class GatewayError : public std::runtime_error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  GatewayErrorKind kind() const { return kind_; }

 private:
  GatewayErrorKind kind_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ProviderReply Complete(const ChatRequest& request,
                                 const std::string& model_name,
                                 double temperature) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{1000};
};

// Minimum spacing between requests to one provider.
struct RateLimit {
  std::chrono::milliseconds min_interval{0};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
void RealSleep(std::chrono::milliseconds duration);

// chars/4, rounded up. Monotone in length.
int EstimateTokens(std::string_view text);
int EstimateTokens(const ChatRequest& request);

const ModelProfile& Route(ModelStage stage, const StageModelMap& map);

class Gateway {
 public:
  Gateway(std::map<std::string, std::shared_ptr<ChatProvider>> providers,
          StageModelMap stages, RetryPolicy retry = {},
          Sleeper sleeper = RealSleep);

  ChatResponse Complete(const ChatRequest& request,
                        const ModelProfile& profile) const;
  ChatResponse Complete(const ChatRequest& request, ModelStage stage) const;

  void SetRateLimit(const std::string& provider_id, RateLimit limit);
  const StageModelMap& stages() const { return stages_; }
  const RetryPolicy& retry_policy() const { return retry_; }

 private:
  ChatProvider& ProviderFor(const std::string& provider_id) const;
  void AwaitRateGate(const std::string& provider_id) const;

  std::map<std::string, std::shared_ptr<ChatProvider>> providers_;
  StageModelMap stages_;
  RetryPolicy retry_;
  Sleeper sleeper_;

  struct Gate {
    RateLimit limit;
    std::chrono::steady_clock::time_point last{};
  };
  mutable std::mutex gate_mu_;
  mutable std::map<std::string, Gate> gates_;
};

class ScriptExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScriptKey {
  Seat seat = 0;
  std::string stage;
  int turn = 0;

  auto operator<=>(const ScriptKey&) const = default;
};
std::string ScriptKeyLabel(const ScriptKey& key);

// Deterministic provider. Every request is recorded together with the reply
// so tests can inspect the exact prompts an agent assembled.
class ScriptedProvider : public ChatProvider {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  struct Record {
    ChatRequest request;
    std::string model_name;
    std::string reply;
  };

  static std::shared_ptr<ScriptedProvider> FromQueue(
      std::vector<std::string> replies);
  static std::shared_ptr<ScriptedProvider> FromKeyed(
      std::map<ScriptKey, std::string> replies);
  static std::shared_ptr<ScriptedProvider> FromResponder(Responder responder);

  ProviderReply Complete(const ChatRequest& request,
                         const std::string& model_name,
                         double temperature) override;

  std::vector<Record> records() const;
  std::size_t call_count() const;
  void ClearRecords();
  void set_recording(bool on);

 private:
  ScriptedProvider() = default;

  mutable std::mutex mu_;
  std::vector<std::string> queue_;
  std::size_t next_ = 0;
  std::optional<std::map<ScriptKey, std::string>> keyed_;
  Responder responder_;
  std::vector<Record> records_;
  std::size_t calls_ = 0;
  bool recording_ = true;
};

enum class ApiStyle { kOpenAi, kAnthropic };

struct HttpProviderConfig {
  ApiStyle style = ApiStyle::kOpenAi;
  std::string base_url;      // e.g. https://api.openai.com
  std::string api_key_env;   // environment variable holding the key
  int max_output_tokens = 1024;
  std::chrono::seconds timeout{120};
};

// Chat-completion over HTTP(S). OpenAI-style: POST /v1/chat/completions.
// Anthropic-style: POST /v1/messages with the system prompt split out.
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpProviderConfig config);

  ProviderReply Complete(const ChatRequest& request,
                         const std::string& model_name,
                         double temperature) override;

  // Exposed for tests of the wire format.
  std::string BuildBody(const ChatRequest& request,
                        const std::string& model_name,
                        double temperature) const;
  std::string Path() const;

 private:
  HttpProviderConfig config_;
};

}  // namespace recon
