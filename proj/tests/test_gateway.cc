#include <gtest/gtest.h>

#include "recon/gateway.h"

namespace recon {
namespace {

ChatRequest Request(std::string text) {
  ChatRequest request;
  request.messages = {{"user", std::move(text)}};
  return request;
}

// Fails the first `failures` calls with the given exception type.
template <typename Error>
class FlakyProvider : public ChatProvider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  ProviderReply Complete(const ChatRequest&, const std::string& model,
                         double) override {
    models.push_back(model);
    if (static_cast<int>(models.size()) <= failures_) throw Error("boom");
    return {"ok from " + model};
  }
  std::vector<std::string> models;

 private:
  int failures_;
};

struct SleepLog {
  std::vector<std::chrono::milliseconds> sleeps;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { sleeps.push_back(d); };
  }
};

TEST(GatewayTest, DefaultRoutingUsesWeakerModelForFormulation) {
  const StageModelMap map = DefaultStageModelMap();
  EXPECT_EQ(Route(ModelStage::kFormulation, map).model_name, "gpt-3.5-turbo-0613");
  EXPECT_EQ(Route(ModelStage::kRefinement, map).model_name, "gpt-4-0613");
  EXPECT_DOUBLE_EQ(Route(ModelStage::kFormulation, map).temperature, 0.6);
  EXPECT_DOUBLE_EQ(Route(ModelStage::kJudge, map).temperature, 0.0);
}

TEST(GatewayTest, UnmappedStageIsAnError) {
  StageModelMap map = DefaultStageModelMap();
  map.erase(ModelStage::kJudge);
  try {
    Route(ModelStage::kJudge, map);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kUnmappedStage);
  }
}

TEST(GatewayTest, UniformMapRoutesEverythingToScripted) {
  const ModelProfile scripted{"local", "scripted", 0.0, 1 << 20, std::nullopt};
  const StageModelMap map = UniformStageModelMap(scripted);
  for (ModelStage stage : {ModelStage::kFormulation, ModelStage::kRefinement,
                           ModelStage::kJudge, ModelStage::kBaseline}) {
    EXPECT_EQ(Route(stage, map), scripted);
  }
}

TEST(GatewayTest, ScriptedQueue) {
  auto provider = ScriptedProvider::FromQueue({"x"});
  Gateway gateway({{"openai", provider}}, DefaultStageModelMap());
  const ChatResponse response =
      gateway.Complete(Request("hello"), ModelStage::kFormulation);
  EXPECT_EQ(response.text, "x");
  EXPECT_EQ(response.attempt_count, 1);
  EXPECT_EQ(provider->records().at(0).request.messages[0].content, "hello");
  EXPECT_THROW(gateway.Complete(Request("again"), ModelStage::kFormulation),
               ScriptExhausted);
}

TEST(GatewayTest, QueueOfSixReturnsInOrder) {
  std::vector<std::string> texts = {"a", "b", "c", "d", "e", "f"};
  auto provider = ScriptedProvider::FromQueue(texts);
  Gateway gateway({{"openai", provider}}, DefaultStageModelMap());
  for (const std::string& text : texts) {
    EXPECT_EQ(gateway.Complete(Request("q"), ModelStage::kFormulation).text, text);
  }
  EXPECT_EQ(provider->call_count(), 6u);
}

TEST(GatewayTest, KeyedScriptMissNamesTheKey) {
  auto provider = ScriptedProvider::FromKeyed({{{1, "think", 0}, "T"}});
  Gateway gateway({{"openai", provider}}, DefaultStageModelMap());
  ChatRequest request = Request("q");
  request.tag = {1, "think", 0};
  EXPECT_EQ(gateway.Complete(request, ModelStage::kFormulation).text, "T");
  request.tag.stage = "speak";
  try {
    gateway.Complete(request, ModelStage::kFormulation);
    FAIL();
  } catch (const ScriptExhausted& e) {
    EXPECT_NE(std::string(e.what()).find("(seat 1, stage speak, turn 0)"),
              std::string::npos);
  }
}

TEST(GatewayTest, LongRequestSwitchesToLongContextVariant) {
  auto provider = ScriptedProvider::FromQueue({"short", "long"});
  Gateway gateway({{"openai", provider}}, DefaultStageModelMap());
  const ModelProfile& weaker = Route(ModelStage::kFormulation, gateway.stages());

  // 4096 tokens is exactly the short limit; one more character tips it over.
  const std::string at_limit(4 * weaker.short_context_limit, 'x');
  EXPECT_FALSE(gateway.Complete(Request(at_limit), weaker).used_long_context);
  const ChatResponse r = gateway.Complete(Request(at_limit + "x"), weaker);
  EXPECT_TRUE(r.used_long_context);
  EXPECT_EQ(r.model_name, "gpt-3.5-turbo-16k-0613");
  EXPECT_EQ(provider->records().at(1).model_name, "gpt-3.5-turbo-16k-0613");
}

TEST(GatewayTest, OverflowWithoutLongVariant) {
  auto provider = ScriptedProvider::FromQueue({"x"});
  ModelProfile profile{"p", "m", 0.6, 10, std::nullopt};
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile));
  try {
    gateway.Complete(Request(std::string(100, 'x')), profile);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kOverflow);
  }
  EXPECT_EQ(provider->call_count(), 0u);
}

TEST(GatewayTest, ProviderSignaledOverflowRetriesOnLongVariant) {
  auto provider = std::make_shared<FlakyProvider<ContextOverflowError>>(1);
  ModelProfile profile{"p", "short", 0.6, 4096, LongContextVariant{"long", 9000}};
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile));
  const ChatResponse r = gateway.Complete(Request("hi"), profile);
  EXPECT_EQ(r.text, "ok from long");
  EXPECT_TRUE(r.used_long_context);
  EXPECT_EQ(provider->models, (std::vector<std::string>{"short", "long"}));
}

TEST(GatewayTest, TransientFailuresRetryWithExponentialBackoff) {
  auto provider = std::make_shared<FlakyProvider<TransientProviderError>>(2);
  ModelProfile profile{"p", "m", 0.6, 4096, std::nullopt};
  SleepLog log;
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile), {},
                  log.sleeper());
  const ChatResponse r = gateway.Complete(Request("hi"), profile);
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(log.sleeps, (std::vector<std::chrono::milliseconds>{
                            std::chrono::milliseconds(1000),
                            std::chrono::milliseconds(2000)}));
}

TEST(GatewayTest, ExhaustedRetriesReportLastCause) {
  auto provider = std::make_shared<FlakyProvider<TransientProviderError>>(5);
  ModelProfile profile{"p", "m", 0.6, 4096, std::nullopt};
  SleepLog log;
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile), {},
                  log.sleeper());
  try {
    gateway.Complete(Request("hi"), profile);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kExhausted);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  EXPECT_EQ(provider->models.size(), 3u);
}

TEST(GatewayTest, UnknownProviderAndEmptyRequest) {
  Gateway gateway({}, DefaultStageModelMap());
  EXPECT_THROW(gateway.Complete(ChatRequest{}, ModelStage::kJudge),
               std::invalid_argument);
  try {
    gateway.Complete(Request("x"), ModelStage::kJudge);
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kUnknownProvider);
  }
}

TEST(GatewayTest, RateLimitSpacesRequests) {
  auto provider = ScriptedProvider::FromQueue({"a", "b"});
  ModelProfile profile{"p", "m", 0.6, 4096, std::nullopt};
  SleepLog log;
  Gateway gateway({{"p", provider}}, UniformStageModelMap(profile), {},
                  log.sleeper());
  gateway.SetRateLimit("p", {std::chrono::milliseconds(60000)});
  gateway.Complete(Request("1"), profile);
  gateway.Complete(Request("2"), profile);
  ASSERT_EQ(log.sleeps.size(), 1u);
  EXPECT_GT(log.sleeps[0].count(), 50000);
}

TEST(GatewayTest, TokenEstimateIsMonotone) {
  int previous = 0;
  for (std::size_t n = 0; n < 100; ++n) {
    const int estimate = EstimateTokens(std::string(n, 'a'));
    EXPECT_GE(estimate, previous);
    EXPECT_EQ(estimate, static_cast<int>((n + 3) / 4));
    previous = estimate;
  }
}

TEST(GatewayTest, ProfileValidation) {
  ModelProfile bad{"", "m", -1, 100, LongContextVariant{"l", 50}};
  EXPECT_EQ(bad.Validate().size(), 3u);
}

}  // namespace
}  // namespace recon
