#include "recon/config.h"

#include <fstream>
#include <set>
#include <sstream>

namespace recon {
namespace {

std::string JoinErrors(const std::vector<std::string>& errors) {
  std::string out = "invalid configuration:";
  for (const std::string& e : errors) out += "\n  " + e;
  return out;
}

// Collects errors while reading; each accessor records "path: problem"
// instead of throwing.
class Reader {
 public:
  std::vector<std::string> errors;

  void Error(const std::string& path, const std::string& problem) {
    errors.push_back(path + ": " + problem);
  }

  void CheckKeys(const Json& j, const std::string& path,
                 std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
      Error(path.empty() ? "(root)" : path, "must be an object");
      return;
    }
    for (const auto& [key, value] : j.items()) {
      bool known = false;
      for (std::string_view a : allowed) known = known || a == key;
      if (!known) Error(Join(path, key), "unknown key");
    }
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <typename T>
  std::optional<T> Get(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) return std::nullopt;
    try {
      return j.at(key).get<T>();
    } catch (const Json::exception&) {
      Error(Join(path, key), "has the wrong type");
      return std::nullopt;
    }
  }

  template <typename T>
  void Read(const Json& j, const std::string& key, const std::string& path, T& out) {
    if (auto v = Get<T>(j, key, path)) out = *v;
  }
};

void ReadGame(Reader& r, const Json& j, GameConfig& game) {
  r.CheckKeys(j, "game",
              {"num_players", "team_sizes", "fails_required",
               "max_consecutive_rejections", "speeches_per_proposal"});
  r.Read(j, "num_players", "game", game.num_players);
  for (const char* key : {"team_sizes", "fails_required"}) {
    if (auto values = r.Get<std::vector<int>>(j, key, "game")) {
      if (values->size() != kNumQuests) {
        r.Error(std::string("game.") + key, "expected 5 entries");
      } else {
        auto& target = std::string_view(key) == "team_sizes" ? game.team_sizes
                                                             : game.fails_required;
        std::copy(values->begin(), values->end(), target.begin());
      }
    }
  }
  r.Read(j, "max_consecutive_rejections", "game", game.max_consecutive_rejections);
  r.Read(j, "speeches_per_proposal", "game", game.speeches_per_proposal);
  for (const std::string& e : game.Validate()) r.errors.push_back("game." + e);
}

void ReadSeats(Reader& r, const Json& j, SeatPlan& plan) {
  auto controller = [&](const Json& value, const std::string& path) {
    if (!value.is_string()) {
      r.Error(path, "must be a controller string");
      return SeatController{};
    }
    auto parsed = ParseController(value.get<std::string>());
    if (!parsed) {
      r.Error(path, "unknown controller '" + value.get<std::string>() + "'");
      return SeatController{};
    }
    return *parsed;
  };
  if (j.is_array()) {
    if (j.size() != kNumPlayers) {
      r.Error("seats", "expected 6 controllers");
      return;
    }
    std::array<SeatController, kNumPlayers> by_seat;
    for (int i = 0; i < kNumPlayers; ++i) {
      by_seat[i] = controller(j[i], "seats[" + std::to_string(i) + "]");
    }
    plan.by_seat = by_seat;
    return;
  }
  r.CheckKeys(j, "seats", {"good", "evil"});
  if (j.contains("good")) plan.good = controller(j["good"], "seats.good");
  if (j.contains("evil")) plan.evil = controller(j["evil"], "seats.evil");
}

void ReadProvider(Reader& r, const Json& j, const std::string& path, ProviderSpec& spec) {
  r.CheckKeys(j, path,
              {"type", "seed", "noncompliance_rate", "evil_fail_rate", "approve_rate",
               "verdict", "base_url", "api_key_env", "max_output_tokens",
               "timeout_s", "min_interval_ms"});
  r.Read(j, "type", path, spec.type);
  if (spec.type == "scripted") {
    r.Read(j, "seed", path, spec.scripted.seed);
    r.Read(j, "noncompliance_rate", path, spec.scripted.noncompliance_rate);
    r.Read(j, "evil_fail_rate", path, spec.scripted.evil_fail_rate);
    r.Read(j, "approve_rate", path, spec.scripted.approve_rate);
    for (double rate : {spec.scripted.noncompliance_rate, spec.scripted.evil_fail_rate,
                        spec.scripted.approve_rate}) {
      if (rate < 0.0 || rate > 1.0) r.Error(path, "rates must lie in [0, 1]");
    }
  } else if (spec.type == "scripted_judge") {
    std::string verdict = "random";
    r.Read(j, "verdict", path, verdict);
    r.Read(j, "seed", path, spec.scripted.seed);
    if (verdict == "a") spec.verdict = ScriptedVerdict::kAlwaysA;
    else if (verdict == "b") spec.verdict = ScriptedVerdict::kAlwaysB;
    else if (verdict == "random") spec.verdict = ScriptedVerdict::kRandom;
    else r.Error(path + ".verdict", "must be \"a\", \"b\" or \"random\"");
  } else if (spec.type == "openai" || spec.type == "anthropic") {
    spec.http.style = spec.type == "openai" ? ApiStyle::kOpenAi : ApiStyle::kAnthropic;
    spec.http.base_url = spec.type == "openai" ? "https://api.openai.com"
                                               : "https://api.anthropic.com";
    spec.http.api_key_env =
        spec.type == "openai" ? "OPENAI_API_KEY" : "ANTHROPIC_API_KEY";
    r.Read(j, "base_url", path, spec.http.base_url);
    r.Read(j, "api_key_env", path, spec.http.api_key_env);
    r.Read(j, "max_output_tokens", path, spec.http.max_output_tokens);
    int timeout = static_cast<int>(spec.http.timeout.count());
    r.Read(j, "timeout_s", path, timeout);
    spec.http.timeout = std::chrono::seconds(timeout);
  } else {
    r.Error(path + ".type", "unknown provider type '" + spec.type + "'");
  }
  r.Read(j, "min_interval_ms", path, spec.min_interval_ms);
}

void ReadProfile(Reader& r, const Json& j, const std::string& path,
                 ModelProfile& profile) {
  r.CheckKeys(j, path,
              {"provider", "model", "temperature", "context_limit", "long_context"});
  r.Read(j, "provider", path, profile.provider_id);
  r.Read(j, "model", path, profile.model_name);
  r.Read(j, "temperature", path, profile.temperature);
  r.Read(j, "context_limit", path, profile.short_context_limit);
  if (j.contains("long_context")) {
    const Json& lc = j.at("long_context");
    if (lc.is_null()) {
      profile.long_context.reset();
    } else {
      r.CheckKeys(lc, path + ".long_context", {"model", "context_limit"});
      LongContextVariant variant;
      r.Read(lc, "model", path + ".long_context", variant.model_name);
      r.Read(lc, "context_limit", path + ".long_context", variant.context_limit);
      profile.long_context = variant;
    }
  }
  for (const std::string& e : profile.Validate()) r.errors.push_back(path + "." + e);
}

std::vector<AgentVariant> ReadVariants(Reader& r, const Json& j, const std::string& path) {
  std::vector<AgentVariant> out;
  if (!j.is_array()) {
    r.Error(path, "must be a list of variant names");
    return out;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_string()) {
      r.Error(at, "must be a variant name");
    } else if (auto v = AgentVariant::FromName(j[i].get<std::string>())) {
      out.push_back(*v);
    } else {
      r.Error(at, "unknown variant '" + j[i].get<std::string>() + "'");
    }
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(JoinErrors(errors)), errors_(std::move(errors)) {}

std::optional<SeatController> ParseController(std::string_view text) {
  if (text == "human") return SeatController{ControllerKind::kHuman, {}};
  if (text == "scripted") return SeatController{ControllerKind::kScripted, {}};
  if (text.rfind("agent:", 0) == 0) {
    if (auto variant = AgentVariant::FromName(text.substr(6))) {
      return SeatController{ControllerKind::kAgent, *variant};
    }
  }
  return std::nullopt;
}

MatchOptions RunConfig::MatchOptionsFor(std::uint64_t seed) const {
  MatchOptions options;
  options.game = game;
  options.seed = seed;
  options.seats = seats;
  options.intervention = intervention;
  options.shadow_methods = shadow_methods;
  return options;
}

RunConfig ParseRunConfig(const Json& j) {
  Reader r;
  RunConfig config;
  r.CheckKeys(j, "",
              {"game", "seats", "human_seats", "providers", "default_provider",
               "stage_models", "retry", "prompt_dir", "log_dir", "parallelism",
               "seeds", "intervention", "shadow_methods", "service"});
  if (!j.is_object()) throw ConfigError(r.errors);

  if (j.contains("game")) ReadGame(r, j.at("game"), config.game);
  if (j.contains("seats")) ReadSeats(r, j.at("seats"), config.seats);
  if (auto humans = r.Get<std::vector<int>>(j, "human_seats", "")) {
    for (std::size_t i = 0; i < humans->size(); ++i) {
      if ((*humans)[i] < 1 || (*humans)[i] > kNumPlayers) {
        r.Error("human_seats[" + std::to_string(i) + "]", "seat must be 1..6");
      }
    }
    config.seats.human_seats = *humans;
  }

  if (j.contains("providers")) {
    const Json& providers = j.at("providers");
    if (!providers.is_object()) r.Error("providers", "must be an object");
    else {
      for (const auto& [id, spec] : providers.items()) {
        ReadProvider(r, spec, "providers." + id, config.providers[id]);
      }
    }
  }
  std::string default_provider = "openai";
  r.Read(j, "default_provider", "", default_provider);
  for (auto& [stage, profile] : config.stage_models) profile.provider_id = default_provider;

  if (j.contains("stage_models")) {
    const Json& stages = j.at("stage_models");
    r.CheckKeys(stages, "stage_models",
                {"formulation", "refinement", "judge", "baseline"});
    if (stages.is_object()) {
      for (const auto& [name, profile] : stages.items()) {
        if (auto stage = ModelStageFromName(name)) {
          ReadProfile(r, profile, "stage_models." + name, config.stage_models[*stage]);
        }
      }
    }
  }
  for (const auto& [stage, profile] : config.stage_models) {
    if (!config.providers.count(profile.provider_id)) {
      r.Error("stage_models." + std::string(ModelStageName(stage)) + ".provider",
              "no provider named '" + profile.provider_id + "'");
    }
  }

  if (j.contains("retry")) {
    const Json& retry = j.at("retry");
    r.CheckKeys(retry, "retry", {"max_attempts", "backoff_ms"});
    r.Read(retry, "max_attempts", "retry", config.retry.max_attempts);
    int backoff = static_cast<int>(config.retry.backoff_base.count());
    r.Read(retry, "backoff_ms", "retry", backoff);
    config.retry.backoff_base = std::chrono::milliseconds(backoff);
    if (config.retry.max_attempts < 1) r.Error("retry.max_attempts", "must be >= 1");
    if (backoff < 0) r.Error("retry.backoff_ms", "must be >= 0");
  }

  if (auto dir = r.Get<std::string>(j, "prompt_dir", "")) config.prompt_dir = *dir;
  if (auto dir = r.Get<std::string>(j, "log_dir", "")) config.log_dir = *dir;
  r.Read(j, "parallelism", "", config.parallelism);
  if (config.parallelism < 1) r.Error("parallelism", "must be >= 1");

  if (j.contains("seeds")) {
    const Json& seeds = j.at("seeds");
    if (seeds.is_array()) {
      config.seeds.clear();
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!seeds[i].is_number_unsigned()) {
          r.Error("seeds[" + std::to_string(i) + "]", "must be a non-negative integer");
        } else {
          config.seeds.push_back(seeds[i].get<std::uint64_t>());
        }
      }
    } else if (seeds.is_object()) {
      r.CheckKeys(seeds, "seeds", {"start", "count"});
      std::uint64_t start = 0;
      int count = 1;
      r.Read(seeds, "start", "seeds", start);
      r.Read(seeds, "count", "seeds", count);
      if (count < 1) r.Error("seeds.count", "must be >= 1");
      config.seeds.clear();
      for (int i = 0; i < count; ++i) config.seeds.push_back(start + i);
    } else {
      r.Error("seeds", "must be a list or {start, count}");
    }
  }

  if (auto mode = r.Get<std::string>(j, "intervention", "")) {
    if (auto parsed = InterventionModeFromName(*mode)) config.intervention = *parsed;
    else r.Error("intervention", "unknown mode '" + *mode + "'");
  }
  if (j.contains("shadow_methods")) {
    config.shadow_methods = ReadVariants(r, j.at("shadow_methods"), "shadow_methods");
  }
  if (j.contains("service")) {
    const Json& service = j.at("service");
    r.CheckKeys(service, "service", {"host", "port", "operator_token_env"});
    r.Read(service, "host", "service", config.service.host);
    r.Read(service, "port", "service", config.service.port);
    r.Read(service, "operator_token_env", "service", config.service.operator_token_env);
    if (config.service.port < 0 || config.service.port > 65535) {
      r.Error("service.port", "must be 0..65535");
    }
  }

  if (!r.errors.empty()) throw ConfigError(r.errors);
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open"});
  std::ostringstream text;
  text << in.rdbuf();
  Json j;
  try {
    j = Json::parse(text.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return ParseRunConfig(j);
}

std::unique_ptr<Runtime> BuildRuntime(const RunConfig& config, Sleeper sleeper) {
  auto runtime = std::make_unique<Runtime>();
  for (const auto& [id, spec] : config.providers) {
    if (spec.type == "scripted") {
      runtime->providers[id] =
          ScriptedProvider::FromResponder(MakeScriptedPolicy(spec.scripted));
    } else if (spec.type == "scripted_judge") {
      runtime->providers[id] = ScriptedProvider::FromResponder(
          MakeScriptedJudge(spec.verdict, spec.scripted.seed));
    } else {
      runtime->providers[id] = std::make_shared<HttpChatProvider>(spec.http);
    }
    if (auto* scripted = dynamic_cast<ScriptedProvider*>(runtime->providers[id].get())) {
      scripted->set_recording(false);
    }
  }
  runtime->gateway = std::make_unique<Gateway>(runtime->providers, config.stage_models,
                                               config.retry, std::move(sleeper));
  for (const auto& [id, spec] : config.providers) {
    if (spec.min_interval_ms > 0) {
      runtime->gateway->SetRateLimit(
          id, RateLimit{std::chrono::milliseconds(spec.min_interval_ms)});
    }
  }
  runtime->catalog = config.prompt_dir ? PromptCatalog::LoadDirectory(*config.prompt_dir)
                                       : PromptCatalog::Builtin();
  return runtime;
}

}  // namespace recon
