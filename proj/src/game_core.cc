#include "recon/game_core.h"

#include <algorithm>
#include <random>

namespace recon {
namespace {

void Require(bool condition, RuleError code, const std::string& message) {
  if (!condition) throw RuleViolation(code, message);
}

void RequirePhase(const GameState& state, Phase phase) {
  Require(state.phase == phase, RuleError::kWrongPhase,
          "action requires phase " + std::string(PhaseName(phase)) +
              ", game is in " + std::string(PhaseName(state.phase)));
}

void RequireSeat(const GameState& state, Seat seat) {
  Require(seat >= 1 && seat <= state.config.num_players,
          RuleError::kSeatOutOfRange,
          "seat " + std::to_string(seat) + " out of range");
}

Seat NextSeat(Seat seat, int num_players) { return seat % num_players + 1; }

PublicEvent PhaseMark(std::string label, int quest_index) {
  PublicEvent event;
  event.kind = EventKind::kPhaseMark;
  event.text = std::move(label);
  event.quest_index = quest_index;
  return event;
}

void Finish(GameState& state, Side winner, FinishCause cause) {
  state.phase = Phase::kFinished;
  state.winner = winner;
  state.finish_cause = cause;
  state.pending_proposal.reset();
  state.history.push_back(PhaseMark(
      "game over: " + std::string(SideName(winner)) + " wins (" +
          std::string(FinishCauseName(cause)) + ")",
      state.quest_index));
}

}  // namespace

Side SideOf(Role role) {
  switch (role) {
    case Role::kMorgana:
    case Role::kAssassin:
      return Side::kEvil;
    default:
      return Side::kGood;
  }
}

std::string_view RoleName(Role role) {
  switch (role) {
    case Role::kMerlin: return "Merlin";
    case Role::kPercival: return "Percival";
    case Role::kMorgana: return "Morgana";
    case Role::kAssassin: return "Assassin";
    case Role::kServant: return "Loyal Servant";
  }
  return "?";
}

std::optional<Role> RoleFromName(std::string_view name) {
  for (Role role : {Role::kMerlin, Role::kPercival, Role::kMorgana,
                    Role::kAssassin, Role::kServant}) {
    if (RoleName(role) == name) return role;
  }
  if (name == "Servant") return Role::kServant;
  return std::nullopt;
}

std::string_view SideName(Side side) {
  return side == Side::kGood ? "good" : "evil";
}

std::optional<Side> SideFromName(std::string_view name) {
  if (name == "good") return Side::kGood;
  if (name == "evil") return Side::kEvil;
  return std::nullopt;
}

std::string_view PhaseName(Phase phase) {
  switch (phase) {
    case Phase::kProposal: return "proposal";
    case Phase::kDiscussion: return "discussion";
    case Phase::kTeamVote: return "team_vote";
    case Phase::kQuest: return "quest";
    case Phase::kAssassination: return "assassination";
    case Phase::kFinished: return "finished";
  }
  return "?";
}

std::string_view FinishCauseName(FinishCause cause) {
  switch (cause) {
    case FinishCause::kThreeFailures: return "three_failures";
    case FinishCause::kRejectionCap: return "rejection_cap";
    case FinishCause::kMerlinAssassinated: return "merlin_assassinated";
    case FinishCause::kAssassinationMissed: return "assassination_missed";
  }
  return "?";
}

std::optional<FinishCause> FinishCauseFromName(std::string_view name) {
  for (FinishCause cause :
       {FinishCause::kThreeFailures, FinishCause::kRejectionCap,
        FinishCause::kMerlinAssassinated, FinishCause::kAssassinationMissed}) {
    if (FinishCauseName(cause) == name) return cause;
  }
  return std::nullopt;
}

std::string_view EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kSpeech: return "speech";
    case EventKind::kProposal: return "proposal";
    case EventKind::kTeamVoteReveal: return "team_vote_reveal";
    case EventKind::kQuestReveal: return "quest_reveal";
    case EventKind::kAssassinationReveal: return "assassination_reveal";
    case EventKind::kPhaseMark: return "phase_mark";
  }
  return "?";
}

std::optional<EventKind> EventKindFromName(std::string_view name) {
  for (EventKind kind :
       {EventKind::kSpeech, EventKind::kProposal, EventKind::kTeamVoteReveal,
        EventKind::kQuestReveal, EventKind::kAssassinationReveal,
        EventKind::kPhaseMark}) {
    if (EventKindName(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view ActionKindName(ActionKind kind) {
  switch (kind) {
    case ActionKind::kNone: return "none";
    case ActionKind::kPropose: return "propose";
    case ActionKind::kSpeak: return "speak";
    case ActionKind::kTeamVote: return "team_vote";
    case ActionKind::kQuestVote: return "quest_vote";
    case ActionKind::kAssassinate: return "assassinate";
  }
  return "?";
}

std::vector<std::string> GameConfig::Validate() const {
  std::vector<std::string> errors;
  if (num_players != kNumPlayers) {
    errors.push_back("num_players: only 6-player games are supported");
  }
  for (int i = 0; i < kNumQuests; ++i) {
    if (team_sizes[i] < 1 || team_sizes[i] > num_players) {
      errors.push_back("team_sizes[" + std::to_string(i) +
                       "]: must be in [1, num_players]");
    }
    if (fails_required[i] < 1) {
      errors.push_back("fails_required[" + std::to_string(i) +
                       "]: must be >= 1");
    }
  }
  if (max_consecutive_rejections < 1) {
    errors.push_back("max_consecutive_rejections: must be >= 1");
  }
  if (speeches_per_proposal < 0) {
    errors.push_back("speeches_per_proposal: must be >= 0");
  }
  return errors;
}

Role GameState::RoleAt(Seat seat) const { return seats.at(seat - 1); }

Seat GameState::SeatOf(Role role) const {
  for (int i = 0; i < kNumPlayers; ++i) {
    if (seats[i] == role) return i + 1;
  }
  return 0;
}

int GameState::Successes() const {
  return static_cast<int>(std::count_if(
      quest_records.begin(), quest_records.end(), [](const QuestRecord& r) {
        return r.outcome == QuestOutcome::kSuccess;
      }));
}

int GameState::Failures() const {
  return static_cast<int>(quest_records.size()) - Successes();
}

int GameState::CurrentTeamSize() const {
  return config.team_sizes[std::clamp(quest_index, 1, kNumQuests) - 1];
}

Seat GameState::NextSpeaker() const {
  return (leader - 1 + speeches_made) % config.num_players + 1;
}

std::array<Role, kNumPlayers> StandardRoles() {
  return {Role::kMerlin,   Role::kPercival, Role::kMorgana,
          Role::kAssassin, Role::kServant,  Role::kServant};
}

GameState NewGame(const GameConfig& config, std::uint64_t seed) {
  std::array<Role, kNumPlayers> roles = StandardRoles();
  std::mt19937_64 rng(seed);
  std::shuffle(roles.begin(), roles.end(), rng);
  return NewGame(config, roles);
}

GameState NewGame(const GameConfig& config,
                  const std::array<Role, kNumPlayers>& assignment) {
  const std::vector<std::string> errors = config.Validate();
  Require(errors.empty(), RuleError::kInvalidConfig,
          errors.empty() ? "" : errors.front());
  auto sorted = assignment;
  auto expected = StandardRoles();
  std::sort(sorted.begin(), sorted.end());
  std::sort(expected.begin(), expected.end());
  Require(sorted == expected, RuleError::kInvalidAssignment,
          "seat assignment must be exactly Merlin, Percival, Morgana, "
          "Assassin and two Loyal Servants");
  GameState state;
  state.config = config;
  state.seats = assignment;
  return state;
}

KnowledgeView GetKnowledgeView(const GameState& state, Seat seat) {
  RequireSeat(state, seat);
  KnowledgeView view;
  view.self_seat = seat;
  view.self_role = state.RoleAt(seat);
  const Seat merlin = state.SeatOf(Role::kMerlin);
  const Seat morgana = state.SeatOf(Role::kMorgana);
  const Seat assassin = state.SeatOf(Role::kAssassin);
  switch (view.self_role) {
    case Role::kMerlin:
      view.known_evil = {std::min(morgana, assassin),
                         std::max(morgana, assassin)};
      break;
    case Role::kPercival:
      view.merlin_morgana_pair = std::make_pair(std::min(merlin, morgana),
                                                std::max(merlin, morgana));
      break;
    case Role::kMorgana:
      view.known_evil = {assassin};
      break;
    case Role::kAssassin:
      view.known_evil = {morgana};
      break;
    case Role::kServant:
      break;
  }
  return view;
}

GameState ApplyProposal(const GameState& state, Seat leader, SeatSet team) {
  RequirePhase(state, Phase::kProposal);
  RequireSeat(state, leader);
  Require(leader == state.leader, RuleError::kWrongProposer,
          SeatLabel(leader) + " is not the leader (" +
              SeatLabel(state.leader) + " is)");
  std::sort(team.begin(), team.end());
  Require(std::adjacent_find(team.begin(), team.end()) == team.end(),
          RuleError::kDuplicateSeat, "team lists a seat twice");
  for (Seat seat : team) RequireSeat(state, seat);
  Require(static_cast<int>(team.size()) == state.CurrentTeamSize(),
          RuleError::kWrongTeamSize,
          "quest " + std::to_string(state.quest_index) + " needs a team of " +
              std::to_string(state.CurrentTeamSize()) + ", got " +
              std::to_string(team.size()));

  GameState next = state;
  PublicEvent event;
  event.kind = EventKind::kProposal;
  event.actor = leader;
  event.quest_index = state.quest_index;
  event.team = team;
  next.history.push_back(std::move(event));
  next.pending_proposal = std::move(team);
  next.proposals_made += 1;
  next.speeches_made = 0;
  next.phase = state.config.speeches_per_proposal > 0 ? Phase::kDiscussion
                                                      : Phase::kTeamVote;
  return next;
}

GameState ApplySpeech(const GameState& state, Seat seat, std::string text) {
  RequirePhase(state, Phase::kDiscussion);
  RequireSeat(state, seat);
  Require(seat == state.NextSpeaker(), RuleError::kOutOfTurn,
          SeatLabel(seat) + " spoke out of turn; " +
              SeatLabel(state.NextSpeaker()) + " is next");
  GameState next = state;
  PublicEvent event;
  event.kind = EventKind::kSpeech;
  event.actor = seat;
  event.quest_index = state.quest_index;
  event.text = std::move(text);
  next.history.push_back(std::move(event));
  next.speeches_made += 1;
  if (next.speeches_made >=
      state.config.num_players * state.config.speeches_per_proposal) {
    next.phase = Phase::kTeamVote;
  }
  return next;
}

GameState ApplyTeamVotes(const GameState& state,
                         const std::map<Seat, TeamVote>& votes) {
  RequirePhase(state, Phase::kTeamVote);
  for (const auto& [seat, vote] : votes) {
    Require(seat >= 1 && seat <= state.config.num_players,
            RuleError::kUnexpectedVoter,
            "vote from nonexistent seat " + std::to_string(seat));
  }
  for (Seat seat = 1; seat <= state.config.num_players; ++seat) {
    Require(votes.count(seat) == 1, RuleError::kMissingVote,
            SeatLabel(seat) + " has not voted");
  }
  const int approvals = static_cast<int>(
      std::count_if(votes.begin(), votes.end(), [](const auto& entry) {
        return entry.second == TeamVote::kApprove;
      }));
  const bool approved = IsApproved(approvals, state.config.num_players);

  GameState next = state;
  PublicEvent event;
  event.kind = EventKind::kTeamVoteReveal;
  event.quest_index = state.quest_index;
  event.team = *state.pending_proposal;
  event.team_votes = votes;
  event.approved = approved;
  next.history.push_back(std::move(event));
  next.speeches_made = 0;

  if (approved) {
    next.phase = Phase::kQuest;
    next.consecutive_rejections = 0;
    return next;
  }
  next.pending_proposal.reset();
  next.consecutive_rejections += 1;
  next.leader = NextSeat(state.leader, state.config.num_players);
  next.phase = Phase::kProposal;
  if (next.consecutive_rejections >= state.config.max_consecutive_rejections) {
    Finish(next, Side::kEvil, FinishCause::kRejectionCap);
  }
  return next;
}

GameState ApplyQuestVotes(const GameState& state,
                          const std::map<Seat, QuestVote>& votes) {
  RequirePhase(state, Phase::kQuest);
  const SeatSet& team = *state.pending_proposal;
  for (const auto& [seat, vote] : votes) {
    Require(std::binary_search(team.begin(), team.end(), seat),
            RuleError::kUnexpectedVoter,
            "seat " + std::to_string(seat) + " is not on the quest team");
    Require(vote == QuestVote::kSuccess ||
                SideOf(state.RoleAt(seat)) == Side::kEvil,
            RuleError::kIllegalQuestVote,
            SeatLabel(seat) + " is on the good side and must vote success");
  }
  for (Seat seat : team) {
    Require(votes.count(seat) == 1, RuleError::kMissingVote,
            SeatLabel(seat) + " has not cast a quest vote");
  }
  const int fails = static_cast<int>(
      std::count_if(votes.begin(), votes.end(), [](const auto& entry) {
        return entry.second == QuestVote::kFail;
      }));

  QuestRecord record;
  record.quest_index = state.quest_index;
  record.team = team;
  record.fail_count = fails;
  record.outcome =
      ResolveQuest(fails, state.config.fails_required[state.quest_index - 1]);

  GameState next = state;
  PublicEvent event;
  event.kind = EventKind::kQuestReveal;
  event.quest_index = state.quest_index;
  event.team = team;
  event.fail_count = fails;
  event.outcome = record.outcome;
  next.history.push_back(std::move(event));
  next.quest_records.push_back(std::move(record));
  next.quest_index += 1;
  next.leader = NextSeat(state.leader, state.config.num_players);
  next.pending_proposal.reset();
  next.phase = Phase::kProposal;

  if (next.Successes() >= kQuestsToWin) {
    next.phase = Phase::kAssassination;
    next.history.push_back(
        PhaseMark("assassination: good side completed three quests",
                  next.quest_index));
  } else if (next.Failures() >= kQuestsToWin) {
    Finish(next, Side::kEvil, FinishCause::kThreeFailures);
  }
  return next;
}

GameState ApplyAssassination(const GameState& state, Seat target) {
  RequirePhase(state, Phase::kAssassination);
  RequireSeat(state, target);
  Require(SideOf(state.RoleAt(target)) == Side::kGood,
          RuleError::kIllegalTarget,
          SeatLabel(target) + " is on the evil side and cannot be targeted");
  const bool hit = state.RoleAt(target) == Role::kMerlin;
  GameState next = state;
  PublicEvent event;
  event.kind = EventKind::kAssassinationReveal;
  event.actor = state.SeatOf(Role::kAssassin);
  event.quest_index = state.quest_index;
  event.target = target;
  event.hit = hit;
  next.history.push_back(std::move(event));
  if (hit) {
    Finish(next, Side::kEvil, FinishCause::kMerlinAssassinated);
  } else {
    Finish(next, Side::kGood, FinishCause::kAssassinationMissed);
  }
  return next;
}

SeatSet AssassinationCandidates(const GameState& state) {
  SeatSet candidates;
  for (Seat seat = 1; seat <= state.config.num_players; ++seat) {
    if (SideOf(state.RoleAt(seat)) == Side::kGood) candidates.push_back(seat);
  }
  return candidates;
}

ActionDescriptor LegalActions(const GameState& state, Seat seat) {
  ActionDescriptor descriptor;
  descriptor.num_players = state.config.num_players;
  if (seat < 1 || seat > state.config.num_players) return descriptor;
  switch (state.phase) {
    case Phase::kProposal:
      if (seat == state.leader) {
        descriptor.kind = ActionKind::kPropose;
        descriptor.team_size = state.CurrentTeamSize();
        for (Seat s = 1; s <= state.config.num_players; ++s) {
          descriptor.candidates.push_back(s);
        }
      }
      break;
    case Phase::kDiscussion:
      if (seat == state.NextSpeaker()) descriptor.kind = ActionKind::kSpeak;
      break;
    case Phase::kTeamVote:
      descriptor.kind = ActionKind::kTeamVote;
      break;
    case Phase::kQuest: {
      const SeatSet& team = *state.pending_proposal;
      if (std::binary_search(team.begin(), team.end(), seat)) {
        descriptor.kind = ActionKind::kQuestVote;
        descriptor.quest_votes = {QuestVote::kSuccess};
        if (SideOf(state.RoleAt(seat)) == Side::kEvil) {
          descriptor.quest_votes.push_back(QuestVote::kFail);
        }
      }
      break;
    }
    case Phase::kAssassination:
      if (state.RoleAt(seat) == Role::kAssassin) {
        descriptor.kind = ActionKind::kAssassinate;
        descriptor.candidates = AssassinationCandidates(state);
      }
      break;
    case Phase::kFinished:
      break;
  }
  return descriptor;
}

bool IsApproved(int approvals, int num_players) {
  return 2 * approvals > num_players;
}

QuestOutcome ResolveQuest(int fail_count, int fails_required) {
  return fail_count >= fails_required ? QuestOutcome::kFailure
                                      : QuestOutcome::kSuccess;
}

std::string SeatLabel(Seat seat) { return "Player " + std::to_string(seat); }

std::string SeatListLabel(const SeatSet& seats) {
  std::string out;
  for (std::size_t i = 0; i < seats.size(); ++i) {
    if (i > 0) out += ", ";
    out += SeatLabel(seats[i]);
  }
  return out;
}

}  // namespace recon
