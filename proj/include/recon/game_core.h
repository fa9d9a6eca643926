// Six-player Avalon rules engine.
//
// GameState is a value type. Every Apply* function takes a state by const
// reference and returns the successor state, throwing RuleViolation when the
// action is illegal in the given state. Nothing here performs I/O or holds
// global state, so states can be copied freely between threads.
//
// Seats are 1-based ("Player 1" .. "Player 6") throughout.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace recon {

using Seat = int;
using SeatSet = std::vector<Seat>;  // sorted, no duplicates

inline constexpr int kNumPlayers = 6;
inline constexpr int kNumQuests = 5;
inline constexpr int kQuestsToWin = 3;

enum class Side { kGood, kEvil };
enum class Role { kMerlin, kPercival, kMorgana, kAssassin, kServant };

Side SideOf(Role role);
std::string_view RoleName(Role role);  // "Merlin", "Loyal Servant", ...
std::string_view SideName(Side side);  // "good" / "evil"
std::optional<Role> RoleFromName(std::string_view name);
std::optional<Side> SideFromName(std::string_view name);

enum class Phase {
  kProposal,
  kDiscussion,
  kTeamVote,
  kQuest,
  kAssassination,
  kFinished,
};
std::string_view PhaseName(Phase phase);

enum class TeamVote { kApprove, kDisapprove };
enum class QuestVote { kSuccess, kFail };
enum class QuestOutcome { kSuccess, kFailure };

enum class FinishCause {
  kThreeFailures,
  kRejectionCap,
  kMerlinAssassinated,
  kAssassinationMissed,
};
std::string_view FinishCauseName(FinishCause cause);
std::optional<FinishCause> FinishCauseFromName(std::string_view name);

struct GameConfig {
  int num_players = kNumPlayers;
  std::array<int, kNumQuests> team_sizes = {2, 3, 4, 3, 4};
  std::array<int, kNumQuests> fails_required = {1, 1, 1, 1, 1};
  int max_consecutive_rejections = 5;
  int speeches_per_proposal = 1;

  // Empty when valid, otherwise one message per offending field.
  std::vector<std::string> Validate() const;

  bool operator==(const GameConfig&) const = default;
};

enum class RuleError {
  kInvalidConfig,
  kInvalidAssignment,
  kWrongPhase,
  kSeatOutOfRange,
  kWrongProposer,
  kWrongTeamSize,
  kDuplicateSeat,
  kOutOfTurn,
  kMissingVote,
  kUnexpectedVoter,
  kIllegalQuestVote,
  kIllegalTarget,
};

class RuleViolation : public std::runtime_error {
 public:
  RuleViolation(RuleError code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  RuleError code() const { return code_; }

 private:
  RuleError code_;
};

struct QuestRecord {
  int quest_index = 0;  // 1-based
  SeatSet team;
  int fail_count = 0;
  QuestOutcome outcome = QuestOutcome::kSuccess;

  bool operator==(const QuestRecord&) const = default;
};

enum class EventKind {
  kSpeech,
  kProposal,
  kTeamVoteReveal,
  kQuestReveal,
  kAssassinationReveal,
  kPhaseMark,
};
std::string_view EventKindName(EventKind kind);
std::optional<EventKind> EventKindFromName(std::string_view name);

// One entry of the public log. Only the fields relevant to `kind` are set.
// A quest reveal carries the fail count and outcome; per-seat quest votes are
// never public.
struct PublicEvent {
  EventKind kind = EventKind::kPhaseMark;
  std::optional<Seat> actor;
  int quest_index = 0;
  std::string text;                   // speech, or phase mark label
  SeatSet team;                       // proposal / quest team
  std::map<Seat, TeamVote> team_votes;
  bool approved = false;              // team vote reveal
  int fail_count = 0;                 // quest reveal
  QuestOutcome outcome = QuestOutcome::kSuccess;
  std::optional<Seat> target;         // assassination
  bool hit = false;                   // assassination

  bool operator==(const PublicEvent&) const = default;
};

struct GameState {
  GameConfig config;
  std::array<Role, kNumPlayers> seats{};  // seats[i] is the role of Player i+1
  Phase phase = Phase::kProposal;
  int quest_index = 1;
  Seat leader = 1;
  int consecutive_rejections = 0;
  int proposals_made = 0;
  int speeches_made = 0;  // in the current discussion
  std::vector<QuestRecord> quest_records;
  std::optional<SeatSet> pending_proposal;
  std::vector<PublicEvent> history;
  std::optional<Side> winner;
  std::optional<FinishCause> finish_cause;

  Role RoleAt(Seat seat) const;
  Seat SeatOf(Role role) const;  // first seat holding the role
  int Successes() const;
  int Failures() const;
  int CurrentTeamSize() const;
  Seat NextSpeaker() const;  // only meaningful in kDiscussion

  bool operator==(const GameState&) const = default;
};

struct KnowledgeView {
  Seat self_seat = 0;
  Role self_role = Role::kServant;
  SeatSet known_evil;
  // Percival only: Merlin and Morgana's seats, sorted so the order carries
  // no information about which is which.
  std::optional<std::pair<Seat, Seat>> merlin_morgana_pair;

  bool operator==(const KnowledgeView&) const = default;
};

enum class ActionKind { kNone, kPropose, kSpeak, kTeamVote, kQuestVote, kAssassinate };
std::string_view ActionKindName(ActionKind kind);

// What a seat may legally do right now.
struct ActionDescriptor {
  ActionKind kind = ActionKind::kNone;
  int team_size = 0;                     // kPropose
  std::vector<QuestVote> quest_votes;    // kQuestVote
  SeatSet candidates;                    // kAssassinate targets, kPropose pool
  int num_players = kNumPlayers;

  bool empty() const { return kind == ActionKind::kNone; }
  bool operator==(const ActionDescriptor&) const = default;
};

// The role multiset every game uses.
std::array<Role, kNumPlayers> StandardRoles();

// Shuffles StandardRoles() with a generator seeded by `seed`.
GameState NewGame(const GameConfig& config, std::uint64_t seed);
// Uses `assignment` verbatim; throws kInvalidAssignment on a wrong multiset.
GameState NewGame(const GameConfig& config,
                  const std::array<Role, kNumPlayers>& assignment);

KnowledgeView GetKnowledgeView(const GameState& state, Seat seat);

GameState ApplyProposal(const GameState& state, Seat leader, SeatSet team);
GameState ApplySpeech(const GameState& state, Seat seat, std::string text);
GameState ApplyTeamVotes(const GameState& state,
                         const std::map<Seat, TeamVote>& votes);
// Returns the successor state; the resolved quest is state.quest_records.back().
GameState ApplyQuestVotes(const GameState& state,
                          const std::map<Seat, QuestVote>& votes);
GameState ApplyAssassination(const GameState& state, Seat target);

ActionDescriptor LegalActions(const GameState& state, Seat seat);

// Seats the Assassin may target: everyone but the two evil seats.
SeatSet AssassinationCandidates(const GameState& state);

// Team vote is approved iff strictly more than half approve.
bool IsApproved(int approvals, int num_players);
QuestOutcome ResolveQuest(int fail_count, int fails_required);

std::string SeatLabel(Seat seat);  // "Player 3"
std::string SeatListLabel(const SeatSet& seats);  // "Player 1, Player 4"

}  // namespace recon
