#include "recon/game_log.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "recon/match.h"
#include "recon/scripted_policy.h"

namespace recon {
namespace {

GameLog PlayGame(std::uint64_t seed) {
  auto provider = ScriptedProvider::FromResponder(MakeScriptedPolicy({.seed = seed}));
  Gateway gateway({{"openai", provider}}, DefaultStageModelMap(), {}, [](auto) {});
  const PromptCatalog catalog = PromptCatalog::Builtin();
  MatchOptions options;
  options.seed = seed;
  options.seats.good = {ControllerKind::kAgent, AgentVariant::ReCon()};
  options.seats.evil = {ControllerKind::kAgent, AgentVariant::CoT()};
  Match match(options, gateway, catalog);
  match.RunToCompletion();
  return match.log();
}

// Index into lines() of the `n`th event line.
std::size_t EventLine(const GameLog& log, int n) {
  for (std::size_t i = 0; i < log.lines().size(); ++i) {
    if (log.lines()[i]["type"] == "event" && log.lines()[i]["index"] == n) return i;
  }
  throw std::out_of_range("no such event");
}

GameLog Mutate(const GameLog& log, std::size_t line, const std::function<void(Json&)>& f) {
  GameLog out;
  for (std::size_t i = 0; i < log.lines().size(); ++i) {
    Json copy = log.lines()[i];
    if (i == line) f(copy);
    out.Append(std::move(copy));
  }
  return out;
}

int ReplayFailureIndex(const GameLog& log) {
  try {
    Replay(log);
  } catch (const ReplayError& e) {
    return e.event_index();
  }
  return -100;
}

TEST(GameLogTest, SerializeParseRoundTrip) {
  const GameLog log = PlayGame(11);
  const GameLog back = GameLog::Parse(log.Serialize());
  EXPECT_EQ(back.Serialize(), log.Serialize());
  EXPECT_NO_THROW(Replay(back));
}

TEST(GameLogTest, FileRoundTrip) {
  const GameLog log = PlayGame(12);
  const auto path =
      std::filesystem::temp_directory_path() / "recon_log_test" / "nested" / "g.jsonl";
  std::filesystem::remove_all(path.parent_path().parent_path());
  log.WriteFile(path);
  EXPECT_EQ(GameLog::ReadFile(path).Serialize(), log.Serialize());
  std::filesystem::remove_all(path.parent_path().parent_path());
}

TEST(GameLogTest, TamperedSpeechReportsItsIndex) {
  const GameLog log = PlayGame(13);
  int speech_index = -1;
  for (const Json& line : log.lines()) {
    if (line["type"] == "event" && line["event"]["kind"] == "speech") {
      speech_index = line["index"];
      break;
    }
  }
  ASSERT_GE(speech_index, 0);
  const GameLog tampered = Mutate(log, EventLine(log, speech_index), [](Json& j) {
    j["event"]["text"] = j["event"]["text"].get<std::string>() + "!";
  });
  EXPECT_EQ(ReplayFailureIndex(tampered), speech_index);
}

TEST(GameLogTest, TamperedVoteReportsItsIndex) {
  const GameLog log = PlayGame(14);
  int index = -1;
  for (const Json& line : log.lines()) {
    if (line["type"] == "event" && line["event"]["kind"] == "team_vote_reveal") {
      index = line["index"];
      break;
    }
  }
  ASSERT_GE(index, 0);
  const GameLog tampered = Mutate(log, EventLine(log, index), [](Json& j) {
    auto& vote = j["event"]["votes"]["1"];
    vote = vote == "approve" ? "disapprove" : "approve";
  });
  EXPECT_EQ(ReplayFailureIndex(tampered), index);
}

TEST(GameLogTest, TamperedDigestAndFooter) {
  const GameLog log = PlayGame(15);
  const GameLog bad_digest =
      Mutate(log, EventLine(log, 3), [](Json& j) { j["digest"] = "0000000000000000"; });
  EXPECT_EQ(ReplayFailureIndex(bad_digest), 3);

  std::size_t footer = 0;
  for (std::size_t i = 0; i < log.lines().size(); ++i) {
    if (log.lines()[i]["type"] == "footer") footer = i;
  }
  const GameLog bad_footer = Mutate(log, footer, [](Json& j) {
    j["winner"] = j["winner"] == "good" ? "evil" : "good";
  });
  EXPECT_THROW(Replay(bad_footer), ReplayError);
}

TEST(GameLogTest, DroppedEventIsDetected) {
  const GameLog log = PlayGame(16);
  GameLog dropped;
  const std::size_t skip = EventLine(log, 5);
  for (std::size_t i = 0; i < log.lines().size(); ++i) {
    if (i != skip) dropped.Append(log.lines()[i]);
  }
  EXPECT_EQ(ReplayFailureIndex(dropped), 5);
}

TEST(GameLogTest, RedactionRemovesPrivateContent) {
  const GameLog log = PlayGame(17);
  const GameLog redacted = Redact(log);
  const std::string text = redacted.Serialize();
  EXPECT_EQ(text.find("\"trace\""), std::string::npos);
  EXPECT_EQ(text.find("quest_votes"), std::string::npos);
  EXPECT_EQ(text.find("digest"), std::string::npos);
  EXPECT_FALSE(redacted.Header()->contains("seats"));
  for (const char* role : {"Merlin", "Morgana", "Assassin", "Percival"}) {
    EXPECT_EQ(text.find(role), std::string::npos) << role;
  }
  // Every private text of every trace is gone unless it was said publicly.
  for (const Json& line : log.lines()) {
    if (line["type"] != "trace") continue;
    const ContemplationTrace trace = ContemplationTraceFromJson(line["trace"]);
    for (const std::string& secret : trace.SecretTexts(line["committed"].get<std::string>())) {
      if (secret.size() < 12) continue;
      EXPECT_EQ(text.find(Json(secret).dump()), std::string::npos);
    }
  }
  EXPECT_THROW(Replay(redacted), ReplayError);
  EXPECT_NE(redacted.Footer(), nullptr);
}

TEST(GameLogTest, TranscriptSections) {
  const GameLog log = PlayGame(18);
  const std::string open = RenderTranscript(log, true);
  const std::string redacted = RenderTranscript(Redact(log), false);
  EXPECT_NE(open.find("== Quest 1 =="), std::string::npos);
  EXPECT_NE(open.find("== Result =="), std::string::npos);
  EXPECT_NE(open.find("[EVIL]"), std::string::npos);
  EXPECT_NE(open.find("thinks)"), std::string::npos);
  EXPECT_EQ(redacted.find("[EVIL]"), std::string::npos);
  EXPECT_EQ(redacted.find("thinks)"), std::string::npos);
  EXPECT_NE(redacted.find("== Quest 1 =="), std::string::npos);
  // Authorization without private data reveals nothing more.
  EXPECT_EQ(RenderTranscript(Redact(log), true), redacted);
}

TEST(GameLogTest, StatsOverDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "recon_stats_test";
  std::filesystem::remove_all(dir);
  int good = 0, evil = 0;
  for (std::uint64_t seed = 20; seed < 24; ++seed) {
    const GameLog log = PlayGame(seed);
    (log.Footer()->at("winner") == "good" ? good : evil)++;
    log.WriteFile(dir / ("seed" + std::to_string(seed) + ".jsonl"));
  }
  GameLog aborted;
  aborted.Append({{"type", "header"}});
  aborted.Append({{"type", "aborted"}, {"error", "x"}});
  aborted.WriteFile(dir / "zz.jsonl");

  const LogStats stats = CollectStats(dir);
  EXPECT_EQ(stats.games, 5);
  EXPECT_EQ(stats.aborted, 1);
  EXPECT_EQ(stats.good_wins, good);
  EXPECT_EQ(stats.evil_wins, evil);
  EXPECT_DOUBLE_EQ(stats.GoodSuccessRate(), static_cast<double>(good) / 4);
  EXPECT_EQ(stats.by_side_controller.at("good:agent:recon").games, 4);
  EXPECT_EQ(stats.by_side_controller.at("good:agent:recon").wins, good);
  ComplianceCounts total;
  for (const auto& [key, counts] : stats.compliance) total += counts;
  EXPECT_GT(total.attempts, 0);
  EXPECT_DOUBLE_EQ(total.FirstTryRate(), 1.0);
  EXPECT_NE(FormatStats(stats).find("good success rate"), std::string::npos);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace recon
