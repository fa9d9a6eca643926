// One game from setup to finish, advanced one unit of work at a time.
//
// Advance() performs the next step (an agent turn, a scripted seat's action,
// or applying collected votes) and reports whether the match can keep going
// on its own. Human seats and the intervention gate halt it until the caller
// submits an action or resolves the pending item. The CLI calls
// RunToCompletion(); the service calls Advance() from its game actor.

#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recon/agent.h"
#include "recon/game_log.h"
#include "recon/gateway.h"
#include "recon/prompt_catalog.h"

namespace recon {

enum class ControllerKind { kAgent, kScripted, kHuman };
std::string_view ControllerKindName(ControllerKind kind);
std::optional<ControllerKind> ControllerKindFromName(std::string_view name);

struct SeatController {
  ControllerKind kind = ControllerKind::kAgent;
  AgentVariant variant;  // kAgent only

  std::string Describe() const;  // "agent:recon", "scripted", "human"
  bool operator==(const SeatController&) const = default;
};

// Controllers are given per side (resolved after roles are dealt) or per
// seat. Human seats override either.
struct SeatPlan {
  SeatController good;
  SeatController evil;
  std::optional<std::array<SeatController, kNumPlayers>> by_seat;
  std::vector<Seat> human_seats;

  std::array<SeatController, kNumPlayers> Resolve(const GameState& state) const;
};

enum class InterventionMode { kOff, kPauseOnSpeech, kPauseOnDecision, kPauseAlways };
std::string_view InterventionModeName(InterventionMode mode);
std::optional<InterventionMode> InterventionModeFromName(std::string_view name);

struct MatchOptions {
  GameConfig game;
  std::uint64_t seed = 0;
  std::optional<std::array<Role, kNumPlayers>> assignment;  // else shuffled by seed
  SeatPlan seats;
  InterventionMode intervention = InterventionMode::kOff;
  // Methods whose responses are also generated, but never committed, at
  // every good-side discussion turn; input for the pairwise judge.
  std::vector<AgentVariant> shadow_methods;
};

struct PendingIntervention {
  Seat seat = 0;
  ActionKind action = ActionKind::kNone;
  std::string proposed_text;
  std::optional<Decision> proposed_decision;
  ContemplationTrace trace;
};

enum class Resolution { kApprove, kEdit, kRejectAndReprompt };
std::string_view ResolutionName(Resolution resolution);
std::optional<Resolution> ResolutionFromName(std::string_view name);

// What a human seat submits: text for speeches, a decision otherwise. A
// decision may also be given as text and parsed with the bracket grammar.
struct HumanAction {
  std::string text;
  std::optional<Decision> decision;
};

class ActionRejected : public std::runtime_error {
 public:
  ActionRejected(const std::string& what, ActionDescriptor legal)
      : std::runtime_error(what), legal_(std::move(legal)) {}
  const ActionDescriptor& legal_actions() const { return legal_; }

 private:
  ActionDescriptor legal_;
};

class Match {
 public:
  enum class Status { kRunning, kAwaitingHuman, kAwaitingIntervention, kFinished };

  Match(MatchOptions options, const Gateway& gateway, const PromptCatalog& catalog,
        ComplianceStats* stats = nullptr);

  Status Advance();
  // Advances until the match finishes or needs outside input.
  Status RunToCompletion();
  Status status() const { return status_; }

  const GameState& state() const { return state_; }
  const GameLog& log() const { return log_; }
  const MatchOptions& options() const { return options_; }
  const std::array<SeatController, kNumPlayers>& controllers() const {
    return controllers_;
  }

  // Seats whose input the match is waiting for, in seat order.
  std::vector<Seat> AwaitingSeats() const;
  ActionDescriptor LegalActionsFor(Seat seat) const;
  // Throws ActionRejected (carrying the legal descriptor) on anything the
  // engine would not accept.
  void SubmitHuman(Seat seat, const HumanAction& action);

  const std::optional<PendingIntervention>& pending_intervention() const {
    return pending_;
  }
  // `text` is required for kEdit and ignored otherwise.
  void ResolveIntervention(Resolution resolution, const std::string& text = "");

  // Records an abort in the log; the match stays unfinished.
  void Abort(const std::string& reason);

 private:
  struct Output {
    std::string text;
    std::optional<Decision> decision;
  };

  Agent& AgentFor(Seat seat);
  bool NeedsGate(ActionKind kind) const;
  void RunAgentTurn(Seat seat, const ActionDescriptor& descriptor);
  Output ScriptedOutput(Seat seat, const ActionDescriptor& descriptor);
  void RunShadows(Seat seat, const ActionDescriptor& descriptor,
                  const ContemplationTrace& primary, const std::string& primary_text);
  void Commit(Seat seat, ActionKind kind, const Output& output);
  void ApplyAndLog(const GameState& next);
  void LogTrace(const ContemplationTrace& trace, const std::string& committed,
                const Json& intervention);
  // The next seat that must act in the current phase, or nullopt if the
  // phase is waiting only on humans (or is being resolved).
  std::vector<Seat> SeatsToAct() const;
  Status Step();

  MatchOptions options_;
  const Gateway& gateway_;
  const PromptCatalog& catalog_;
  ComplianceStats* stats_;
  GameState state_;
  std::array<SeatController, kNumPlayers> controllers_;
  std::map<Seat, std::unique_ptr<Agent>> agents_;
  std::map<std::pair<Seat, std::string>, std::unique_ptr<Agent>> shadows_;
  std::map<Seat, TeamVote> team_votes_;
  std::map<Seat, QuestVote> quest_votes_;
  std::optional<PendingIntervention> pending_;
  GameLog log_;
  Status status_ = Status::kRunning;
  bool aborted_ = false;
  std::uint64_t scripted_draws_ = 0;
};

std::string_view MatchStatusName(Match::Status status);

}  // namespace recon
