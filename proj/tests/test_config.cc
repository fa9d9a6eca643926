#include "recon/config.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace recon {
namespace {

Json Minimal() {
  return Json::parse(R"({
    "seats": {"good": "agent:recon", "evil": "agent:cot"},
    "providers": {"local": {"type": "scripted", "seed": 1}},
    "default_provider": "local"
  })");
}

std::vector<std::string> ErrorsOf(const Json& j) {
  try {
    ParseRunConfig(j);
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool HasErrorAt(const std::vector<std::string>& errors, const std::string& path) {
  for (const std::string& e : errors) {
    if (e.rfind(path + ": ", 0) == 0) return true;
  }
  return false;
}

TEST(ConfigTest, MinimalConfig) {
  const RunConfig config = ParseRunConfig(Minimal());
  EXPECT_EQ(config.seats.good.variant, AgentVariant::ReCon());
  EXPECT_EQ(config.seats.evil.variant, AgentVariant::CoT());
  for (const auto& [stage, profile] : config.stage_models) {
    EXPECT_EQ(profile.provider_id, "local");
  }
  EXPECT_EQ(config.retry.max_attempts, 3);
  EXPECT_EQ(config.retry.backoff_base, std::chrono::milliseconds(1000));
  EXPECT_EQ(config.service.operator_token_env, "RECON_OPERATOR_TOKEN");
  EXPECT_EQ(config.game, GameConfig{});
}

TEST(ConfigTest, FullConfig) {
  Json j = Minimal();
  j["game"] = {{"max_consecutive_rejections", 4}, {"speeches_per_proposal", 2}};
  j["seats"] = {"agent:recon", "human", "scripted", "agent:cot+human_speech",
                "agent:recon_wo_refinement", "scripted"};
  j["human_seats"] = {2};
  j["seeds"] = {{"start", 10}, {"count", 3}};
  j["intervention"] = "pause_on_speech";
  j["shadow_methods"] = {"recon", "cot"};
  j["stage_models"] = {{"refinement",
                        {{"provider", "local"},
                         {"model", "big"},
                         {"temperature", 1.0},
                         {"context_limit", 100},
                         {"long_context", {{"model", "bigger"}, {"context_limit", 1000}}}}}};
  const RunConfig config = ParseRunConfig(j);
  EXPECT_EQ(config.game.max_consecutive_rejections, 4);
  ASSERT_TRUE(config.seats.by_seat);
  EXPECT_EQ((*config.seats.by_seat)[3].variant.style, SpeechStyle::kHumanLikeSpeech);
  EXPECT_EQ(config.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
  EXPECT_EQ(config.intervention, InterventionMode::kPauseOnSpeech);
  EXPECT_EQ(config.shadow_methods.size(), 2u);
  const ModelProfile& refinement = config.stage_models.at(ModelStage::kRefinement);
  EXPECT_EQ(refinement.model_name, "big");
  EXPECT_EQ(refinement.long_context->model_name, "bigger");
  EXPECT_EQ(config.MatchOptionsFor(11).seed, 11u);
}

TEST(ConfigTest, ErrorsCarryFieldPaths) {
  Json j = Minimal();
  j["bogus"] = 1;
  j["seats"]["good"] = "agent:nonsense";
  j["providers"]["local"]["noncompliance_rate"] = 2.0;
  j["providers"]["remote"] = {{"type", "carrier-pigeon"}};
  j["retry"] = {{"max_attempts", 0}};
  j["seeds"] = {1, -2};
  j["human_seats"] = {9};
  j["intervention"] = "sometimes";
  j["shadow_methods"] = {"recon", "magic"};
  j["service"] = {{"port", "eighty"}};
  j["game"] = {{"team_sizes", {2, 3, 4, 3, 9}}};
  j["stage_models"] = {{"judge", {{"provider", "nobody"}, {"temperature", -1}}}};
  const auto errors = ErrorsOf(j);
  for (const char* path :
       {"bogus", "seats.good", "providers.local", "providers.remote.type",
        "retry.max_attempts", "seeds[1]", "human_seats[0]", "intervention",
        "shadow_methods[1]", "service.port", "stage_models.judge.temperature",
        "stage_models.judge.provider"}) {
    EXPECT_TRUE(HasErrorAt(errors, path)) << path;
  }
  bool game_error = false;
  for (const std::string& e : errors) game_error |= e.rfind("game.", 0) == 0;
  EXPECT_TRUE(game_error);
}

TEST(ConfigTest, UnknownProviderReferenced) {
  Json j = Minimal();
  j["default_provider"] = "missing";
  EXPECT_TRUE(HasErrorAt(ErrorsOf(j), "stage_models.formulation.provider"));
}

TEST(ConfigTest, Controllers) {
  EXPECT_EQ(ParseController("human")->kind, ControllerKind::kHuman);
  EXPECT_EQ(ParseController("scripted")->kind, ControllerKind::kScripted);
  EXPECT_EQ(ParseController("agent:recon_wo_second_order")->variant,
            AgentVariant::WithoutSecondOrder());
  EXPECT_FALSE(ParseController("agent:"));
  EXPECT_FALSE(ParseController("robot"));
}

TEST(ConfigTest, LoadFileAndBuildRuntime) {
  const auto path = std::filesystem::temp_directory_path() / "recon_config_test.json";
  std::ofstream(path) << Minimal().dump(2);
  const RunConfig config = LoadRunConfig(path);
  const auto runtime = BuildRuntime(config, [](auto) {});
  ASSERT_TRUE(runtime->gateway);
  EXPECT_TRUE(runtime->catalog.Has("refine"));
  ChatRequest request;
  request.messages = {{"user", "hi"}};
  request.tag.stage = "think";
  EXPECT_FALSE(runtime->gateway->Complete(request, ModelStage::kFormulation).text.empty());
  std::filesystem::remove(path);
  EXPECT_THROW(LoadRunConfig(path), ConfigError);
}

TEST(ConfigTest, MalformedJsonFile) {
  const auto path = std::filesystem::temp_directory_path() / "recon_config_bad.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(LoadRunConfig(path), ConfigError);
  std::filesystem::remove(path);
}

TEST(ConfigTest, ShippedConfigsParse) {
  int files = 0;
  for (const auto& entry :
       std::filesystem::directory_iterator(std::filesystem::path(RECON_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    ++files;
    EXPECT_NO_THROW(LoadRunConfig(entry.path())) << entry.path();
  }
  EXPECT_GE(files, 3);
}

}  // namespace
}  // namespace recon
