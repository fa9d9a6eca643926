// Run configuration, read from a JSON file.
//
//   {
//     "game":           { "team_sizes": [2,3,4,3,4], ... },       optional
//     "seats":          { "good": "agent:recon", "evil": "agent:cot" }
//                       or [ "agent:recon", "human", "scripted", ... ]  (6 seats)
//     "human_seats":    [ 2 ],
//     "providers":      { "local": { "type": "scripted", "seed": 0 },
//                         "openai": { "type": "openai",
//                                     "base_url": "https://api.openai.com",
//                                     "api_key_env": "OPENAI_API_KEY" } },
//     "default_provider": "openai",
//     "stage_models":   { "refinement": { "provider": "openai",
//                                         "model": "gpt-4-0613", ... } },
//     "retry":          { "max_attempts": 3, "backoff_ms": 1000 },
//     "prompt_dir":     "prompts",
//     "log_dir":        "logs",
//     "parallelism":    1,
//     "seeds":          [1, 2, 3]  or  { "start": 1, "count": 20 },
//     "intervention":   "off",
//     "shadow_methods": [ "recon", "cot" ],
//     "service":        { "host": "127.0.0.1", "port": 8080,
//                         "operator_token_env": "RECON_OPERATOR_TOKEN" }
//   }
//
// Unknown keys are errors. Every error names the offending field path.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recon/gateway.h"
#include "recon/json_io.h"
#include "recon/match.h"
#include "recon/prompt_catalog.h"
#include "recon/scripted_policy.h"

namespace recon {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct ProviderSpec {
  // "scripted", "scripted_judge", "openai" or "anthropic".
  std::string type = "scripted";
  ScriptedPolicyOptions scripted;
  ScriptedVerdict verdict = ScriptedVerdict::kRandom;
  HttpProviderConfig http;
  int min_interval_ms = 0;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string operator_token_env = "RECON_OPERATOR_TOKEN";
};

struct RunConfig {
  GameConfig game;
  SeatPlan seats;
  std::map<std::string, ProviderSpec> providers;
  StageModelMap stage_models = DefaultStageModelMap();
  RetryPolicy retry;
  std::optional<std::filesystem::path> prompt_dir;
  std::filesystem::path log_dir = "logs";
  int parallelism = 1;
  std::vector<std::uint64_t> seeds = {0};
  InterventionMode intervention = InterventionMode::kOff;
  std::vector<AgentVariant> shadow_methods;
  ServiceConfig service;

  MatchOptions MatchOptionsFor(std::uint64_t seed) const;
};

// "agent:recon", "agent:cot+human_speech", "scripted", "human".
std::optional<SeatController> ParseController(std::string_view text);

RunConfig ParseRunConfig(const Json& j);
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Providers, gateway and prompt catalog built from a RunConfig.
struct Runtime {
  std::map<std::string, std::shared_ptr<ChatProvider>> providers;
  std::unique_ptr<Gateway> gateway;
  PromptCatalog catalog;
};
std::unique_ptr<Runtime> BuildRuntime(const RunConfig& config,
                                      Sleeper sleeper = RealSleep);

}  // namespace recon
