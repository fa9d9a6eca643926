#include "recon/gateway.h"

#include <thread>

namespace recon {

std::string_view ModelStageName(ModelStage stage) {
  switch (stage) {
    case ModelStage::kFormulation: return "formulation";
    case ModelStage::kRefinement: return "refinement";
    case ModelStage::kJudge: return "judge";
    case ModelStage::kBaseline: return "baseline";
  }
  return "?";
}

std::optional<ModelStage> ModelStageFromName(std::string_view name) {
  for (ModelStage stage : {ModelStage::kFormulation, ModelStage::kRefinement,
                           ModelStage::kJudge, ModelStage::kBaseline}) {
    if (ModelStageName(stage) == name) return stage;
  }
  return std::nullopt;
}

std::vector<std::string> ModelProfile::Validate() const {
  std::vector<std::string> errors;
  if (provider_id.empty()) errors.push_back("provider: must be set");
  if (model_name.empty()) errors.push_back("model: must be set");
  if (temperature < 0) errors.push_back("temperature: must be >= 0");
  if (short_context_limit <= 0) {
    errors.push_back("context_limit: must be positive");
  }
  if (long_context && long_context->context_limit <= short_context_limit) {
    errors.push_back(
        "long_context.context_limit: must exceed the short context limit");
  }
  return errors;
}

StageModelMap DefaultStageModelMap() {
  ModelProfile weaker{"openai", "gpt-3.5-turbo-0613", 0.6, 4096,
                      LongContextVariant{"gpt-3.5-turbo-16k-0613", 16384}};
  ModelProfile stronger{"openai", "gpt-4-0613", 0.6, 8192,
                        LongContextVariant{"gpt-4-32k-0613", 32768}};
  ModelProfile judge = stronger;
  judge.temperature = 0.0;
  return {{ModelStage::kFormulation, weaker},
          {ModelStage::kRefinement, stronger},
          {ModelStage::kJudge, judge},
          {ModelStage::kBaseline, weaker}};
}

StageModelMap UniformStageModelMap(const ModelProfile& profile) {
  return {{ModelStage::kFormulation, profile},
          {ModelStage::kRefinement, profile},
          {ModelStage::kJudge, profile},
          {ModelStage::kBaseline, profile}};
}

std::string ChatRequest::Joined() const {
  std::string joined;
  for (const ChatMessage& message : messages) {
    joined += message.content;
    joined += '\n';
  }
  return joined;
}

void RealSleep(std::chrono::milliseconds duration) {
  std::this_thread::sleep_for(duration);
}

int EstimateTokens(std::string_view text) {
  return static_cast<int>((text.size() + 3) / 4);
}

int EstimateTokens(const ChatRequest& request) {
  std::size_t chars = 0;
  for (const ChatMessage& message : request.messages) {
    chars += message.content.size();
  }
  return static_cast<int>((chars + 3) / 4);
}

const ModelProfile& Route(ModelStage stage, const StageModelMap& map) {
  const auto it = map.find(stage);
  if (it == map.end()) {
    throw GatewayError(GatewayErrorKind::kUnmappedStage,
                       "no model profile for stage " +
                           std::string(ModelStageName(stage)));
  }
  return it->second;
}

Gateway::Gateway(std::map<std::string, std::shared_ptr<ChatProvider>> providers,
                 StageModelMap stages, RetryPolicy retry, Sleeper sleeper)
    : providers_(std::move(providers)),
      stages_(std::move(stages)),
      retry_(retry),
      sleeper_(std::move(sleeper)) {}

ChatProvider& Gateway::ProviderFor(const std::string& provider_id) const {
  const auto it = providers_.find(provider_id);
  if (it == providers_.end() || !it->second) {
    throw GatewayError(GatewayErrorKind::kUnknownProvider,
                       "no provider registered as '" + provider_id + "'");
  }
  return *it->second;
}

void Gateway::SetRateLimit(const std::string& provider_id, RateLimit limit) {
  std::lock_guard<std::mutex> lock(gate_mu_);
  gates_[provider_id].limit = limit;
}

void Gateway::AwaitRateGate(const std::string& provider_id) const {
  std::chrono::milliseconds wait{0};
  {
    std::lock_guard<std::mutex> lock(gate_mu_);
    const auto it = gates_.find(provider_id);
    if (it == gates_.end() || it->second.limit.min_interval.count() == 0) {
      return;
    }
    Gate& gate = it->second;
    const auto now = std::chrono::steady_clock::now();
    const auto ready = gate.last + gate.limit.min_interval;
    if (ready > now) {
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(ready - now);
    }
    gate.last = std::max(now, ready);
  }
  if (wait.count() > 0) sleeper_(wait);
}

ChatResponse Gateway::Complete(const ChatRequest& request,
                               ModelStage stage) const {
  return Complete(request, Route(stage, stages_));
}

ChatResponse Gateway::Complete(const ChatRequest& request,
                               const ModelProfile& profile) const {
  if (request.messages.empty()) {
    throw std::invalid_argument("chat request has no messages");
  }
  ChatProvider& provider = ProviderFor(profile.provider_id);

  const int estimate = EstimateTokens(request);
  std::string model = profile.model_name;
  bool long_context = false;
  if (estimate > profile.short_context_limit) {
    if (!profile.long_context ||
        estimate > profile.long_context->context_limit) {
      throw GatewayError(GatewayErrorKind::kOverflow,
                         "request of ~" + std::to_string(estimate) +
                             " tokens exceeds the context of " + model);
    }
    model = profile.long_context->model_name;
    long_context = true;
  }

  std::string last_cause;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    AwaitRateGate(profile.provider_id);
    try {
      ProviderReply reply = provider.Complete(request, model, profile.temperature);
      ChatResponse response;
      response.text = std::move(reply.text);
      response.model_name = model;
      response.used_long_context = long_context;
      response.attempt_count = attempt;
      response.prompt_tokens = reply.prompt_tokens;
      response.completion_tokens = reply.completion_tokens;
      response.latency_ms = reply.latency_ms;
      return response;
    } catch (const ContextOverflowError& e) {
      if (long_context || !profile.long_context) {
        throw GatewayError(GatewayErrorKind::kOverflow, e.what());
      }
      model = profile.long_context->model_name;
      long_context = true;
      last_cause = e.what();
    } catch (const TransientProviderError& e) {
      last_cause = e.what();
      if (attempt < retry_.max_attempts) {
        sleeper_(retry_.backoff_base * (1LL << (attempt - 1)));
      }
    }
  }
  throw GatewayError(GatewayErrorKind::kExhausted,
                     "gave up after " + std::to_string(retry_.max_attempts) +
                         " attempts; last cause: " + last_cause);
}

std::string ScriptKeyLabel(const ScriptKey& key) {
  return "(seat " + std::to_string(key.seat) + ", stage " + key.stage +
         ", turn " + std::to_string(key.turn) + ")";
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::FromQueue(
    std::vector<std::string> replies) {
  std::shared_ptr<ScriptedProvider> provider(new ScriptedProvider());
  provider->queue_ = std::move(replies);
  return provider;
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::FromKeyed(
    std::map<ScriptKey, std::string> replies) {
  std::shared_ptr<ScriptedProvider> provider(new ScriptedProvider());
  provider->keyed_ = std::move(replies);
  return provider;
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::FromResponder(
    Responder responder) {
  std::shared_ptr<ScriptedProvider> provider(new ScriptedProvider());
  provider->responder_ = std::move(responder);
  return provider;
}

ProviderReply ScriptedProvider::Complete(const ChatRequest& request,
                                         const std::string& model_name,
                                         double /*temperature*/) {
  std::string reply;
  if (responder_) {
    // The responder runs outside the lock so it may be arbitrarily slow.
    reply = responder_(request);
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (!responder_) {
    if (keyed_) {
      const ScriptKey key{request.tag.seat, request.tag.stage, request.tag.turn};
      const auto it = keyed_->find(key);
      if (it == keyed_->end()) {
        throw ScriptExhausted("script has no reply for " + ScriptKeyLabel(key));
      }
      reply = it->second;
    } else {
      if (next_ >= queue_.size()) {
        throw ScriptExhausted("script queue exhausted after " +
                              std::to_string(queue_.size()) + " replies");
      }
      reply = queue_[next_++];
    }
  }
  ++calls_;
  if (recording_) records_.push_back({request, model_name, reply});
  ProviderReply out;
  out.prompt_tokens = EstimateTokens(request);
  out.completion_tokens = EstimateTokens(reply);
  out.text = std::move(reply);
  return out;
}

std::vector<ScriptedProvider::Record> ScriptedProvider::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::size_t ScriptedProvider::call_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

void ScriptedProvider::ClearRecords() {
  std::lock_guard<std::mutex> lock(mu_);
  records_.clear();
}

void ScriptedProvider::set_recording(bool on) {
  std::lock_guard<std::mutex> lock(mu_);
  recording_ = on;
}

}  // namespace recon
