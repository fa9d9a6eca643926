#include "recon/service.h"

#include <gtest/gtest.h>
#include <httplib.h>

#include "recon/game_log.h"

namespace recon {
namespace {

using namespace std::chrono_literals;

constexpr char kOperator[] = "op-secret";

RunConfig TestConfig() {
  return ParseRunConfig(Json::parse(R"({
    "seats": {"good": "agent:recon", "evil": "agent:cot"},
    "providers": {"local": {"type": "scripted", "seed": 7}},
    "default_provider": "local"
  })"));
}

struct Server {
  Server()
      : config(TestConfig()),
        runtime(BuildRuntime(config, [](auto) {})),
        service(config, *runtime->gateway, runtime->catalog, kOperator) {
    port = service.Start("127.0.0.1", 0);
  }
  ~Server() { service.Stop(); }

  httplib::Client Client() const {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    return client;
  }
  std::string Create(const Json& body, Json* tokens = nullptr) {
    auto res = Client().Post("/games", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    const Json reply = Json::parse(res->body);
    if (tokens) *tokens = reply["seat_tokens"];
    return reply["id"];
  }

  RunConfig config;
  std::unique_ptr<Runtime> runtime;
  GameService service;
  int port = 0;
};

httplib::Headers Bearer(const std::string& token) {
  return {{"Authorization", "Bearer " + token}};
}

TEST(ServiceTest, HealthAndUnknownGame) {
  Server s;
  auto client = s.Client();
  EXPECT_EQ(client.Get("/health")->status, 200);
  EXPECT_EQ(client.Get("/games/nope/state")->status, 404);
  EXPECT_EQ(client.Post("/games", R"({"human_seats": [9]})", "application/json")->status,
            400);
}

TEST(ServiceTest, ServedLogMatchesDirectMatch) {
  Server s;
  const std::string id = s.Create({{"seed", 42}});
  EXPECT_EQ(s.service.WaitIdle(id, 30s), "finished");
  auto res = s.Client().Get("/games/" + id + "/log?mode=full", Bearer(kOperator));
  ASSERT_EQ(res->status, 200);

  const auto runtime = BuildRuntime(s.config, [](auto) {});
  Match match(s.config.MatchOptionsFor(42), *runtime->gateway, runtime->catalog);
  match.RunToCompletion();
  EXPECT_EQ(res->body, match.log().Serialize());

  auto redacted = s.Client().Get("/games/" + id + "/log");
  EXPECT_EQ(redacted->body, Redact(match.log()).Serialize());
}

TEST(ServiceTest, HumanSeatRoundTrip) {
  Server s;
  Json tokens;
  const std::string id = s.Create({{"seed", 3}, {"human_seats", {2}}}, &tokens);
  const std::string token = tokens["2"];
  ASSERT_FALSE(token.empty());
  auto client = s.Client();
  const std::string base = "/games/" + id;

  EXPECT_EQ(client.Get(base + "/seats/2")->status, 403);
  EXPECT_EQ(client.Get(base + "/seats/2", Bearer("wrong"))->status, 403);
  EXPECT_EQ(client.Get(base + "/seats/3", Bearer(token))->status, 403);

  bool saw_rejection = false;
  for (int guard = 0; guard < 500; ++guard) {
    const std::string status = s.service.WaitIdle(id, 30s);
    if (status == "finished") break;
    ASSERT_EQ(status, "awaiting_human");
    auto view = client.Get(base + "/seats/2", Bearer(token));
    ASSERT_EQ(view->status, 200);
    const Json legal = Json::parse(view->body)["legal_actions"];
    Json action = {{"seat", 2}};
    const std::string kind = legal["kind"];
    if (kind == "speak") {
      action["text"] = "I am a loyal servant.";
    } else if (kind == "propose") {
      if (!saw_rejection) {
        // One team member too many.
        Json bad = action;
        Json team = legal["candidates"];
        team.erase(team.begin() + legal["team_size"].get<int>() + 1, team.end());
        bad["decision"] = {{"kind", "propose"}, {"team", team}};
        auto res = client.Post(base + "/actions", Bearer(token), bad.dump(),
                               "application/json");
        ASSERT_EQ(res->status, 422);
        const Json reply = Json::parse(res->body);
        EXPECT_FALSE(reply["accepted"]);
        EXPECT_EQ(reply["legal_actions"], legal);
        saw_rejection = true;
      }
      Json team = legal["candidates"];
      team.erase(team.begin() + legal["team_size"].get<int>(), team.end());
      action["decision"] = {{"kind", "propose"}, {"team", team}};
    } else if (kind == "team_vote") {
      action["text"] = "[approve]";
    } else if (kind == "quest_vote") {
      action["decision"] = {{"kind", "quest_vote"}, {"vote", legal["options"][0]}};
    } else {
      action["decision"] = {{"kind", "assassinate"}, {"target", legal["candidates"][0]}};
    }
    auto res = client.Post(base + "/actions", Bearer(token), action.dump(),
                           "application/json");
    ASSERT_EQ(res->status, 200) << res->body;
  }
  const Json state = Json::parse(client.Get(base + "/state")->body);
  EXPECT_EQ(state["status"], "finished");
  EXPECT_TRUE(saw_rejection);
}

TEST(ServiceTest, TracesNeedOperatorForFullMode) {
  Server s;
  const std::string id = s.Create({{"seed", 5}});
  s.service.WaitIdle(id, 30s);
  auto client = s.Client();
  const std::string base = "/games/" + id;
  EXPECT_EQ(client.Get(base + "/traces?mode=full")->status, 403);
  EXPECT_EQ(client.Get(base + "/traces?mode=full", Bearer("guess"))->status, 403);
  EXPECT_EQ(client.Get(base + "/log?mode=full")->status, 403);
  auto full = client.Get(base + "/traces?mode=full", Bearer(kOperator));
  ASSERT_EQ(full->status, 200);
  EXPECT_FALSE(Json::parse(full->body)["traces"].empty());
  auto redacted = client.Get(base + "/traces");
  ASSERT_EQ(redacted->status, 200);
  EXPECT_LT(redacted->body.size(), full->body.size());
}

TEST(ServiceTest, EventStreamIsRedactedAndEndsAfterFooter) {
  Server s;
  const std::string id = s.Create({{"seed", 8}});
  std::string stream;
  auto client = s.Client();
  auto res = client.Get("/games/" + id + "/events", [&](const char* data, size_t n) {
    stream.append(data, n);
    return true;
  });
  ASSERT_TRUE(res);
  EXPECT_NE(stream.find("event: header"), std::string::npos);
  EXPECT_NE(stream.find("event: status"), std::string::npos);
  EXPECT_NE(stream.find("event: footer"), std::string::npos);
  EXPECT_EQ(stream.find("digest"), std::string::npos);
  EXPECT_EQ(stream.find("\"seats\""), std::string::npos);
  EXPECT_EQ(stream.find("event: trace"), std::string::npos);
  EXPECT_EQ(stream.find("Morgana"), std::string::npos);

  // Resuming skips what was already seen.
  std::string tail;
  client.Get("/games/" + id + "/events?from=3", [&](const char* data, size_t n) {
    tail.append(data, n);
    return true;
  });
  EXPECT_EQ(tail.rfind("id: 3\n", 0), 0u);
  EXPECT_EQ(stream.substr(stream.find("id: 3\n")), tail);
}

TEST(ServiceTest, InterventionEditOverHttp) {
  Server s;
  const std::string id = s.Create({{"seed", 4}, {"intervention", "pause_on_speech"}});
  auto client = s.Client();
  const std::string base = "/games/" + id;
  ASSERT_EQ(s.service.WaitIdle(id, 30s), "awaiting_intervention");

  EXPECT_EQ(client.Get(base + "/intervention")->status, 403);
  auto pending = client.Get(base + "/intervention", Bearer(kOperator));
  ASSERT_EQ(pending->status, 200);
  const Json item = Json::parse(pending->body)["pending"];
  EXPECT_EQ(item["action"], "speak");
  EXPECT_TRUE(item.contains("trace"));

  EXPECT_EQ(client.Post(base + "/intervention", Bearer(kOperator), R"({"resolution": "edit"})",
                        "application/json")
                ->status,
            400);
  auto resolved = client.Post(base + "/intervention", Bearer(kOperator),
                              R"({"resolution": "edit", "text": "edited by operator"})",
                              "application/json");
  ASSERT_EQ(resolved->status, 200) << resolved->body;
  ASSERT_EQ(s.service.WaitIdle(id, 30s), "awaiting_intervention");
  const std::string log = client.Get(base + "/log")->body;
  EXPECT_NE(log.find("edited by operator"), std::string::npos);

  // Approve everything else until the end; then nothing is pending.
  for (int guard = 0; guard < 500 && s.service.WaitIdle(id, 30s) != "finished"; ++guard) {
    client.Post(base + "/intervention", Bearer(kOperator), R"({"resolution": "approve"})",
                "application/json");
  }
  EXPECT_EQ(client.Post(base + "/intervention", Bearer(kOperator),
                        R"({"resolution": "approve"})", "application/json")
                ->status,
            409);
}

}  // namespace
}  // namespace recon
