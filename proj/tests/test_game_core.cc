#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "recon/game_core.h"

namespace recon {
namespace {

using R = Role;

// Morgana at 3, Assassin at 5, Merlin at 2, Percival at 1.
std::array<Role, kNumPlayers> FixedSeats() {
  return {R::kPercival, R::kMerlin, R::kMorgana,
          R::kServant,  R::kAssassin, R::kServant};
}

GameState Fresh() { return NewGame(GameConfig{}, FixedSeats()); }

GameState ThroughDiscussion(GameState s, const SeatSet& team) {
  s = ApplyProposal(s, s.leader, team);
  for (int i = 0; i < kNumPlayers * s.config.speeches_per_proposal; ++i) {
    s = ApplySpeech(s, s.NextSpeaker(), "words");
  }
  return s;
}

std::map<Seat, TeamVote> AllVotes(TeamVote v) {
  std::map<Seat, TeamVote> votes;
  for (Seat seat = 1; seat <= kNumPlayers; ++seat) votes[seat] = v;
  return votes;
}

std::map<Seat, QuestVote> QuestVotes(const GameState& s, int fails) {
  std::map<Seat, QuestVote> votes;
  for (Seat seat : *s.pending_proposal) {
    const bool evil = SideOf(s.RoleAt(seat)) == Side::kEvil;
    votes[seat] = evil && fails-- > 0 ? QuestVote::kFail : QuestVote::kSuccess;
  }
  return votes;
}

TEST(GameCoreTest, SeededAssignmentIsDeterministic) {
  EXPECT_EQ(NewGame(GameConfig{}, 42).seats, NewGame(GameConfig{}, 42).seats);
}

TEST(GameCoreTest, EveryGameHasTwoEvilSeats) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const GameState s = NewGame(GameConfig{}, seed);
    const auto evil = std::count_if(s.seats.begin(), s.seats.end(), [](Role r) {
      return SideOf(r) == Side::kEvil;
    });
    EXPECT_EQ(evil, 2);
    auto sorted = s.seats;
    auto standard = StandardRoles();
    std::sort(sorted.begin(), sorted.end());
    std::sort(standard.begin(), standard.end());
    EXPECT_EQ(sorted, standard);
  }
}

TEST(GameCoreTest, RejectsAssignmentWithTwoMerlins) {
  auto seats = FixedSeats();
  seats[3] = R::kMerlin;
  try {
    NewGame(GameConfig{}, seats);
    FAIL();
  } catch (const RuleViolation& e) {
    EXPECT_EQ(e.code(), RuleError::kInvalidAssignment);
  }
}

TEST(GameCoreTest, InvalidConfigIsRejected) {
  GameConfig config;
  config.team_sizes[0] = 7;
  config.fails_required[1] = 0;
  config.max_consecutive_rejections = 0;
  EXPECT_EQ(config.Validate().size(), 3u);
  EXPECT_THROW(NewGame(config, 1), RuleViolation);
}

TEST(GameCoreTest, InitialState) {
  const GameState s = Fresh();
  EXPECT_EQ(s.phase, Phase::kProposal);
  EXPECT_EQ(s.leader, 1);
  EXPECT_EQ(s.quest_index, 1);
  EXPECT_TRUE(s.history.empty());
  EXPECT_FALSE(s.winner);
}

TEST(GameCoreTest, KnowledgeViews) {
  const GameState s = Fresh();
  const KnowledgeView merlin = GetKnowledgeView(s, 2);
  EXPECT_EQ(merlin.known_evil, (SeatSet{3, 5}));
  EXPECT_FALSE(merlin.merlin_morgana_pair);

  const KnowledgeView percival = GetKnowledgeView(s, 1);
  EXPECT_TRUE(percival.known_evil.empty());
  ASSERT_TRUE(percival.merlin_morgana_pair);
  EXPECT_EQ(*percival.merlin_morgana_pair, std::make_pair(2, 3));

  EXPECT_EQ(GetKnowledgeView(s, 3).known_evil, SeatSet{5});
  EXPECT_EQ(GetKnowledgeView(s, 5).known_evil, SeatSet{3});

  const KnowledgeView servant = GetKnowledgeView(s, 4);
  EXPECT_TRUE(servant.known_evil.empty());
  EXPECT_FALSE(servant.merlin_morgana_pair);

  EXPECT_THROW(GetKnowledgeView(s, 0), RuleViolation);
  EXPECT_THROW(GetKnowledgeView(s, 7), RuleViolation);
}

TEST(GameCoreTest, PercivalPairCarriesNoOrder) {
  // Swap Merlin and Morgana: the pair Percival sees must not change.
  auto seats = FixedSeats();
  std::swap(seats[1], seats[2]);
  const GameState swapped = NewGame(GameConfig{}, seats);
  EXPECT_EQ(GetKnowledgeView(swapped, 1).merlin_morgana_pair,
            GetKnowledgeView(Fresh(), 1).merlin_morgana_pair);
}

TEST(GameCoreTest, Proposal) {
  const GameState s = ApplyProposal(Fresh(), 1, {1, 4});
  EXPECT_EQ(s.phase, Phase::kDiscussion);
  EXPECT_EQ(s.pending_proposal, (SeatSet{1, 4}));
  ASSERT_EQ(s.history.back().kind, EventKind::kProposal);

  auto code = [](auto f) {
    try {
      f();
    } catch (const RuleViolation& e) {
      return e.code();
    }
    return RuleError::kInvalidConfig;
  };
  EXPECT_EQ(code([] { ApplyProposal(Fresh(), 1, {1, 2, 3}); }),
            RuleError::kWrongTeamSize);
  EXPECT_EQ(code([] { ApplyProposal(Fresh(), 2, {1, 2}); }),
            RuleError::kWrongProposer);
  EXPECT_EQ(code([] { ApplyProposal(Fresh(), 1, {2, 2}); }),
            RuleError::kDuplicateSeat);
  EXPECT_EQ(code([] { ApplyProposal(Fresh(), 1, {1, 9}); }),
            RuleError::kSeatOutOfRange);
}

TEST(GameCoreTest, DiscussionOrderAndVerbatimText) {
  GameState s = ApplyProposal(Fresh(), 1, {1, 4});
  EXPECT_EQ(s.NextSpeaker(), 1);
  s = ApplySpeech(s, 1, "");
  EXPECT_EQ(s.history.back().text, "");
  EXPECT_EQ(s.NextSpeaker(), 2);
  EXPECT_THROW(ApplySpeech(s, 4, "out of turn"), RuleViolation);
  for (Seat seat = 2; seat <= 6; ++seat) s = ApplySpeech(s, seat, "hi");
  EXPECT_EQ(s.phase, Phase::kTeamVote);
}

TEST(GameCoreTest, TwoSpeechesPerProposal) {
  GameConfig config;
  config.speeches_per_proposal = 2;
  GameState s = ApplyProposal(NewGame(config, FixedSeats()), 1, {1, 4});
  for (int i = 0; i < 11; ++i) s = ApplySpeech(s, s.NextSpeaker(), "x");
  EXPECT_EQ(s.phase, Phase::kDiscussion);
  s = ApplySpeech(s, s.NextSpeaker(), "x");
  EXPECT_EQ(s.phase, Phase::kTeamVote);
}

TEST(GameCoreTest, TeamVoteExamples) {
  const GameState s = ThroughDiscussion(Fresh(), {1, 4});
  using V = TeamVote;
  const std::map<Seat, TeamVote> tie = {{1, V::kApprove},    {2, V::kApprove},
                                        {3, V::kApprove},    {4, V::kDisapprove},
                                        {5, V::kDisapprove}, {6, V::kDisapprove}};
  const GameState rejected = ApplyTeamVotes(s, tie);
  EXPECT_EQ(rejected.phase, Phase::kProposal);
  EXPECT_EQ(rejected.leader, 2);
  EXPECT_EQ(rejected.consecutive_rejections, 1);

  auto four = tie;
  four[4] = V::kApprove;
  const GameState approved = ApplyTeamVotes(s, four);
  EXPECT_EQ(approved.phase, Phase::kQuest);
  EXPECT_EQ(approved.consecutive_rejections, 0);

  auto missing = tie;
  missing.erase(6);
  EXPECT_THROW(ApplyTeamVotes(s, missing), RuleViolation);
}

TEST(GameCoreTest, AllTeamVoteVectorsMatchMajorityOracle) {
  const GameState s = ThroughDiscussion(Fresh(), {1, 4});
  for (int mask = 0; mask < 64; ++mask) {
    std::map<Seat, TeamVote> votes;
    int approvals = 0;
    for (int i = 0; i < 6; ++i) {
      const bool approve = (mask >> i) & 1;
      approvals += approve;
      votes[i + 1] = approve ? TeamVote::kApprove : TeamVote::kDisapprove;
    }
    const bool oracle = 2 * approvals > 6;
    EXPECT_EQ(ApplyTeamVotes(s, votes).phase == Phase::kQuest, oracle) << mask;
  }
}

TEST(GameCoreTest, RejectionCapHandsEvilTheWin) {
  GameState s = Fresh();
  for (int k = 1; k <= 5; ++k) {
    const Seat leader = s.leader;
    EXPECT_EQ(leader, (k - 1) % 6 + 1);
    SeatSet team = {leader, leader % 6 + 1};
    std::sort(team.begin(), team.end());
    s = ApplyTeamVotes(ThroughDiscussion(s, team), AllVotes(TeamVote::kDisapprove));
  }
  EXPECT_EQ(s.phase, Phase::kFinished);
  EXPECT_EQ(s.winner, Side::kEvil);
  EXPECT_EQ(s.finish_cause, FinishCause::kRejectionCap);
}

TEST(GameCoreTest, QuestExamples) {
  GameState s = ApplyTeamVotes(ThroughDiscussion(Fresh(), {1, 4}),
                               AllVotes(TeamVote::kApprove));
  GameState after = ApplyQuestVotes(s, QuestVotes(s, 0));
  EXPECT_EQ(after.quest_records.back().outcome, QuestOutcome::kSuccess);
  EXPECT_EQ(after.quest_index, 2);
  EXPECT_EQ(after.leader, 2);

  // Quest 2 team of three with one saboteur.
  s = ApplyTeamVotes(ThroughDiscussion(after, {1, 2, 5}),
                     AllVotes(TeamVote::kApprove));
  after = ApplyQuestVotes(s, {{1, QuestVote::kSuccess},
                              {2, QuestVote::kSuccess},
                              {5, QuestVote::kFail}});
  EXPECT_EQ(after.quest_records.back().fail_count, 1);
  EXPECT_EQ(after.quest_records.back().outcome, QuestOutcome::kFailure);

  // A Servant may not sabotage; a non-member may not vote.
  try {
    ApplyQuestVotes(s, {{1, QuestVote::kSuccess},
                        {2, QuestVote::kFail},
                        {5, QuestVote::kFail}});
    FAIL();
  } catch (const RuleViolation& e) {
    EXPECT_EQ(e.code(), RuleError::kIllegalQuestVote);
  }
  EXPECT_THROW(ApplyQuestVotes(s, {{1, QuestVote::kSuccess},
                                   {2, QuestVote::kSuccess},
                                   {6, QuestVote::kSuccess}}),
               RuleViolation);
}

TEST(GameCoreTest, QuestRevealCarriesOnlyTheCount) {
  GameState s = ApplyTeamVotes(ThroughDiscussion(Fresh(), {1, 3}),
                               AllVotes(TeamVote::kApprove));
  s = ApplyQuestVotes(s, QuestVotes(s, 1));
  const PublicEvent& reveal = s.history.back();
  ASSERT_EQ(reveal.kind, EventKind::kQuestReveal);
  EXPECT_EQ(reveal.fail_count, 1);
  EXPECT_TRUE(reveal.team_votes.empty());
  EXPECT_FALSE(reveal.actor);
}

TEST(GameCoreTest, QuestOutcomeOracleOverAllVoteVectors) {
  for (int fails_required = 1; fails_required <= 2; ++fails_required) {
    for (int size = 1; size <= 6; ++size) {
      for (int fails = 0; fails <= size; ++fails) {
        const bool oracle_failure = fails >= fails_required;
        EXPECT_EQ(ResolveQuest(fails, fails_required) == QuestOutcome::kFailure,
                  oracle_failure);
      }
    }
  }
}

GameState ToAssassination() {
  GameState s = Fresh();
  const SeatSet good_teams[3] = {{1, 2}, {1, 2, 4}, {1, 2, 4, 6}};
  for (const SeatSet& team : good_teams) {
    s = ApplyTeamVotes(ThroughDiscussion(s, team), AllVotes(TeamVote::kApprove));
    s = ApplyQuestVotes(s, QuestVotes(s, 0));
  }
  return s;
}

TEST(GameCoreTest, AssassinationOutcomes) {
  const GameState s = ToAssassination();
  ASSERT_EQ(s.phase, Phase::kAssassination);
  EXPECT_EQ(AssassinationCandidates(s), (SeatSet{1, 2, 4, 6}));

  const GameState hit = ApplyAssassination(s, 2);
  EXPECT_EQ(hit.winner, Side::kEvil);
  EXPECT_EQ(hit.phase, Phase::kFinished);

  const GameState miss = ApplyAssassination(s, 4);
  EXPECT_EQ(miss.winner, Side::kGood);
  const auto reveal = std::find_if(
      miss.history.rbegin(), miss.history.rend(), [](const PublicEvent& e) {
        return e.kind == EventKind::kAssassinationReveal;
      });
  ASSERT_NE(reveal, miss.history.rend());
  EXPECT_FALSE(reveal->hit);
  EXPECT_EQ(reveal->target, 4);
  EXPECT_EQ(miss.Successes(), 3);

  EXPECT_THROW(ApplyAssassination(s, 3), RuleViolation);
  EXPECT_THROW(ApplyAssassination(s, 5), RuleViolation);
}

TEST(GameCoreTest, ThreeFailuresEndTheGame) {
  GameState s = Fresh();
  const SeatSet teams[3] = {{1, 3}, {2, 3, 4}, {1, 3, 4, 6}};
  for (const SeatSet& team : teams) {
    s = ApplyTeamVotes(ThroughDiscussion(s, team), AllVotes(TeamVote::kApprove));
    s = ApplyQuestVotes(s, QuestVotes(s, 1));
  }
  EXPECT_EQ(s.winner, Side::kEvil);
  EXPECT_EQ(s.finish_cause, FinishCause::kThreeFailures);
}

TEST(GameCoreTest, LegalActions) {
  GameState s = Fresh();
  EXPECT_EQ(LegalActions(s, 1).kind, ActionKind::kPropose);
  EXPECT_EQ(LegalActions(s, 1).team_size, 2);
  EXPECT_TRUE(LegalActions(s, 2).empty());

  s = ApplyTeamVotes(ThroughDiscussion(s, {1, 3}), AllVotes(TeamVote::kApprove));
  EXPECT_EQ(LegalActions(s, 1).quest_votes, std::vector<QuestVote>{QuestVote::kSuccess});
  EXPECT_EQ(LegalActions(s, 3).quest_votes,
            (std::vector<QuestVote>{QuestVote::kSuccess, QuestVote::kFail}));
  EXPECT_TRUE(LegalActions(s, 2).empty());

  const GameState done = ApplyAssassination(ToAssassination(), 2);
  for (Seat seat = 1; seat <= kNumPlayers; ++seat) {
    EXPECT_TRUE(LegalActions(done, seat).empty());
  }
}

TEST(GameCoreTest, ApplyDoesNotMutateInput) {
  const GameState s = Fresh();
  const GameState copy = s;
  ApplyProposal(s, 1, {1, 4});
  EXPECT_EQ(s, copy);
}

}  // namespace
}  // namespace recon
