#include "recon/match.h"

#include <algorithm>
#include <random>

#include <spdlog/spdlog.h>

#include "recon/scripted_policy.h"

namespace recon {
namespace {

Json SeatSetJson(const SeatSet& seats) {
  Json out = Json::array();
  for (Seat s : seats) out.push_back(s);
  return out;
}

std::string ContextId(std::uint64_t seed, Seat seat, std::size_t history_index) {
  return "g" + std::to_string(seed) + "-p" + std::to_string(seat) + "-h" +
         std::to_string(history_index);
}

}  // namespace

std::string_view ControllerKindName(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kAgent: return "agent";
    case ControllerKind::kScripted: return "scripted";
    case ControllerKind::kHuman: return "human";
  }
  return "?";
}

std::optional<ControllerKind> ControllerKindFromName(std::string_view name) {
  for (ControllerKind kind :
       {ControllerKind::kAgent, ControllerKind::kScripted, ControllerKind::kHuman}) {
    if (ControllerKindName(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string SeatController::Describe() const {
  if (kind == ControllerKind::kAgent) return "agent:" + variant.Name();
  return std::string(ControllerKindName(kind));
}

std::array<SeatController, kNumPlayers> SeatPlan::Resolve(
    const GameState& state) const {
  std::array<SeatController, kNumPlayers> out;
  for (Seat seat = 1; seat <= kNumPlayers; ++seat) {
    if (by_seat) {
      out[seat - 1] = (*by_seat)[seat - 1];
    } else {
      out[seat - 1] = SideOf(state.RoleAt(seat)) == Side::kGood ? good : evil;
    }
  }
  for (Seat seat : human_seats) {
    if (seat < 1 || seat > kNumPlayers) {
      throw std::invalid_argument("human seat out of range: " + std::to_string(seat));
    }
    out[seat - 1] = SeatController{ControllerKind::kHuman, {}};
  }
  return out;
}

std::string_view InterventionModeName(InterventionMode mode) {
  switch (mode) {
    case InterventionMode::kOff: return "off";
    case InterventionMode::kPauseOnSpeech: return "pause_on_speech";
    case InterventionMode::kPauseOnDecision: return "pause_on_decision";
    case InterventionMode::kPauseAlways: return "pause_always";
  }
  return "?";
}

std::optional<InterventionMode> InterventionModeFromName(std::string_view name) {
  for (InterventionMode mode :
       {InterventionMode::kOff, InterventionMode::kPauseOnSpeech,
        InterventionMode::kPauseOnDecision, InterventionMode::kPauseAlways}) {
    if (InterventionModeName(mode) == name) return mode;
  }
  return std::nullopt;
}

std::string_view ResolutionName(Resolution resolution) {
  switch (resolution) {
    case Resolution::kApprove: return "approve";
    case Resolution::kEdit: return "edit";
    case Resolution::kRejectAndReprompt: return "reject";
  }
  return "?";
}

std::optional<Resolution> ResolutionFromName(std::string_view name) {
  for (Resolution r :
       {Resolution::kApprove, Resolution::kEdit, Resolution::kRejectAndReprompt}) {
    if (ResolutionName(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view MatchStatusName(Match::Status status) {
  switch (status) {
    case Match::Status::kRunning: return "running";
    case Match::Status::kAwaitingHuman: return "awaiting_human";
    case Match::Status::kAwaitingIntervention: return "awaiting_intervention";
    case Match::Status::kFinished: return "finished";
  }
  return "?";
}

Match::Match(MatchOptions options, const Gateway& gateway,
             const PromptCatalog& catalog, ComplianceStats* stats)
    : options_(std::move(options)),
      gateway_(gateway),
      catalog_(catalog),
      stats_(stats),
      state_(options_.assignment ? NewGame(options_.game, *options_.assignment)
                                 : NewGame(options_.game, options_.seed)),
      controllers_(options_.seats.Resolve(state_)) {
  for (Seat seat = 1; seat <= kNumPlayers; ++seat) {
    const SeatController& controller = controllers_[seat - 1];
    if (controller.kind != ControllerKind::kAgent) continue;
    AgentMemory memory;
    memory.seat = seat;
    memory.knowledge = GetKnowledgeView(state_, seat);
    agents_[seat] = std::make_unique<Agent>(
        std::move(memory), controller.variant, gateway_, catalog_,
        options_.seed * 1000003ULL + static_cast<std::uint64_t>(seat), stats_);
  }

  Json header;
  header["type"] = "header";
  header["version"] = kLogVersion;
  header["config"] = ToJson(options_.game);
  header["seed"] = options_.seed;
  Json seats = Json::array();
  for (Role role : state_.seats) seats.push_back(RoleName(role));
  header["seats"] = std::move(seats);
  Json controllers = Json::array();
  for (const SeatController& controller : controllers_) {
    controllers.push_back(controller.Describe());
  }
  header["controllers"] = std::move(controllers);
  header["intervention"] = InterventionModeName(options_.intervention);
  if (!options_.shadow_methods.empty()) {
    Json methods = Json::array();
    for (const AgentVariant& v : options_.shadow_methods) methods.push_back(v.Name());
    header["shadow_methods"] = std::move(methods);
  }
  log_.Append(std::move(header));
}

Agent& Match::AgentFor(Seat seat) { return *agents_.at(seat); }

bool Match::NeedsGate(ActionKind kind) const {
  switch (options_.intervention) {
    case InterventionMode::kOff: return false;
    case InterventionMode::kPauseOnSpeech: return kind == ActionKind::kSpeak;
    case InterventionMode::kPauseOnDecision: return kind != ActionKind::kSpeak;
    case InterventionMode::kPauseAlways: return true;
  }
  return false;
}

std::vector<Seat> Match::SeatsToAct() const {
  std::vector<Seat> seats;
  switch (state_.phase) {
    case Phase::kProposal:
      seats.push_back(state_.leader);
      break;
    case Phase::kDiscussion:
      seats.push_back(state_.NextSpeaker());
      break;
    case Phase::kTeamVote:
      for (Seat s = 1; s <= kNumPlayers; ++s) {
        if (!team_votes_.count(s)) seats.push_back(s);
      }
      break;
    case Phase::kQuest:
      for (Seat s : *state_.pending_proposal) {
        if (!quest_votes_.count(s)) seats.push_back(s);
      }
      break;
    case Phase::kAssassination:
      seats.push_back(state_.SeatOf(Role::kAssassin));
      break;
    case Phase::kFinished:
      break;
  }
  return seats;
}

std::vector<Seat> Match::AwaitingSeats() const {
  std::vector<Seat> seats;
  if (status_ == Status::kFinished || aborted_) return seats;
  for (Seat s : SeatsToAct()) {
    if (controllers_[s - 1].kind == ControllerKind::kHuman) seats.push_back(s);
  }
  return seats;
}

ActionDescriptor Match::LegalActionsFor(Seat seat) const {
  const std::vector<Seat> seats = SeatsToAct();
  if (aborted_ || std::find(seats.begin(), seats.end(), seat) == seats.end()) {
    ActionDescriptor none;
    none.num_players = state_.config.num_players;
    return none;
  }
  return LegalActions(state_, seat);
}

Match::Status Match::Advance() {
  if (aborted_) throw std::logic_error("match was aborted");
  status_ = Step();
  return status_;
}

Match::Status Match::RunToCompletion() {
  while (Advance() == Status::kRunning) {
  }
  return status_;
}

Match::Status Match::Step() {
  if (state_.phase == Phase::kFinished) return Status::kFinished;
  if (pending_) return Status::kAwaitingIntervention;

  const std::vector<Seat> seats = SeatsToAct();
  if (seats.empty() && state_.phase == Phase::kTeamVote) {
    ApplyAndLog(ApplyTeamVotes(state_, team_votes_));
    team_votes_.clear();
  } else if (seats.empty() && state_.phase == Phase::kQuest) {
    Json record;
    record["type"] = "quest_votes";
    record["private"] = true;
    record["quest"] = state_.quest_index;
    record["seats"] = SeatSetJson(*state_.pending_proposal);
    Json votes = Json::object();
    for (const auto& [seat, vote] : quest_votes_) {
      votes[std::to_string(seat)] = QuestVoteName(vote);
    }
    record["votes"] = std::move(votes);
    log_.Append(std::move(record));
    ApplyAndLog(ApplyQuestVotes(state_, quest_votes_));
    quest_votes_.clear();
  } else {
    const auto next = std::find_if(seats.begin(), seats.end(), [&](Seat s) {
      return controllers_[s - 1].kind != ControllerKind::kHuman;
    });
    if (next == seats.end()) return Status::kAwaitingHuman;
    const Seat seat = *next;
    const ActionDescriptor descriptor = LegalActions(state_, seat);
    if (controllers_[seat - 1].kind == ControllerKind::kAgent) {
      RunAgentTurn(seat, descriptor);
    } else {
      Commit(seat, descriptor.kind, ScriptedOutput(seat, descriptor));
    }
  }

  if (state_.phase == Phase::kFinished) return Status::kFinished;
  if (pending_) return Status::kAwaitingIntervention;
  return Status::kRunning;
}

void Match::RunAgentTurn(Seat seat, const ActionDescriptor& descriptor) {
  const PublicView view = MakePublicView(state_);
  ActResult result = AgentFor(seat).Act(view, descriptor);

  if (!options_.shadow_methods.empty() && descriptor.kind == ActionKind::kSpeak &&
      SideOf(state_.RoleAt(seat)) == Side::kGood) {
    RunShadows(seat, descriptor, result.trace, result.public_text);
  }

  if (!result.trace.forced && NeedsGate(descriptor.kind)) {
    pending_ = PendingIntervention{seat, descriptor.kind, result.public_text,
                                   result.decision, std::move(result.trace)};
    return;
  }
  LogTrace(result.trace, result.public_text, Json());
  Commit(seat, descriptor.kind, {result.public_text, result.decision});
}

void Match::RunShadows(Seat seat, const ActionDescriptor& descriptor,
                       const ContemplationTrace& primary,
                       const std::string& primary_text) {
  const PublicView view = MakePublicView(state_);
  const std::string context_id = ContextId(options_.seed, seat, state_.history.size());
  const KnowledgeView knowledge = GetKnowledgeView(state_, seat);
  const std::string context =
      RenderKnowledge(knowledge) + "\n\n" + RenderHistory(view.history) + "\n\n" +
      BuildTaskPrompt(catalog_, view, knowledge, descriptor).rendered_text;

  auto line = [&](const std::string& method, const ContemplationTrace& trace,
                  const std::string& response) {
    Json j;
    j["type"] = "shadow";
    j["private"] = true;
    j["seat"] = seat;
    j["role"] = RoleName(state_.RoleAt(seat));
    j["context_id"] = context_id;
    j["context"] = context;
    j["method"] = method;
    j["response"] = response;
    j["trace"] = ToJson(trace);
    log_.Append(std::move(j));
  };

  const std::string own = controllers_[seat - 1].variant.Name();
  for (const AgentVariant& method : options_.shadow_methods) {
    if (method.Name() == own) {
      line(own, primary, primary_text);
      continue;
    }
    auto& shadow = shadows_[{seat, method.Name()}];
    if (!shadow) {
      AgentMemory memory;
      memory.seat = seat;
      memory.knowledge = knowledge;
      shadow = std::make_unique<Agent>(
          std::move(memory), method, gateway_, catalog_,
          Fnv1a(method.Name(), options_.seed * 1000003ULL + seat), nullptr);
    }
    ActResult result = shadow->Act(view, descriptor);
    line(method.Name(), result.trace, result.public_text);
  }
}

Match::Output Match::ScriptedOutput(Seat seat, const ActionDescriptor& descriptor) {
  std::mt19937_64 rng(Fnv1a(std::to_string(seat) + "/" + std::to_string(scripted_draws_++),
                            options_.seed + 0x5bd1e995ULL));
  Output out;
  switch (descriptor.kind) {
    case ActionKind::kPropose: {
      SeatSet pool = descriptor.candidates;
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(descriptor.team_size);
      std::sort(pool.begin(), pool.end());
      out.decision = pool;
      break;
    }
    case ActionKind::kSpeak:
      out.text = SeatLabel(seat) + " has nothing to add.";
      break;
    case ActionKind::kTeamVote:
      out.decision = rng() % 2 == 0 ? TeamVote::kApprove : TeamVote::kDisapprove;
      break;
    case ActionKind::kQuestVote:
      out.decision = descriptor.quest_votes[rng() % descriptor.quest_votes.size()];
      break;
    case ActionKind::kAssassinate:
      out.decision = descriptor.candidates[rng() % descriptor.candidates.size()];
      break;
    case ActionKind::kNone:
      throw std::logic_error("scripted seat asked to act with no legal action");
  }
  if (out.decision && descriptor.kind != ActionKind::kSpeak) {
    out.text = RenderDecision(*out.decision);
  }
  return out;
}

void Match::Commit(Seat seat, ActionKind kind, const Output& output) {
  switch (kind) {
    case ActionKind::kPropose:
      ApplyAndLog(ApplyProposal(state_, seat, std::get<SeatSet>(*output.decision)));
      break;
    case ActionKind::kSpeak:
      ApplyAndLog(ApplySpeech(state_, seat, output.text));
      break;
    case ActionKind::kTeamVote:
      team_votes_[seat] = std::get<TeamVote>(*output.decision);
      break;
    case ActionKind::kQuestVote:
      quest_votes_[seat] = std::get<QuestVote>(*output.decision);
      break;
    case ActionKind::kAssassinate:
      ApplyAndLog(ApplyAssassination(state_, std::get<Seat>(*output.decision)));
      break;
    case ActionKind::kNone:
      break;
  }
}

void Match::ApplyAndLog(const GameState& next) {
  const std::string digest = StateDigest(next);
  for (std::size_t i = state_.history.size(); i < next.history.size(); ++i) {
    Json line;
    line["type"] = "event";
    line["index"] = i;
    line["event"] = ToJson(next.history[i]);
    line["digest"] = digest;
    log_.Append(std::move(line));
  }
  state_ = next;
  if (state_.phase == Phase::kFinished) {
    Json footer;
    footer["type"] = "footer";
    footer["winner"] = SideName(*state_.winner);
    footer["cause"] = FinishCauseName(*state_.finish_cause);
    footer["events"] = state_.history.size();
    footer["digest"] = digest;
    log_.Append(std::move(footer));
  }
}

void Match::LogTrace(const ContemplationTrace& trace, const std::string& committed,
                     const Json& intervention) {
  Json line;
  line["type"] = "trace";
  line["private"] = true;
  line["seat"] = trace.seat;
  line["history_index"] = state_.history.size();
  line["committed"] = committed;
  line["trace"] = ToJson(trace);
  if (!intervention.is_null()) line["intervention"] = intervention;
  log_.Append(std::move(line));
}

void Match::SubmitHuman(Seat seat, const HumanAction& action) {
  if (aborted_ || state_.phase == Phase::kFinished) {
    throw ActionRejected("the game is over", ActionDescriptor{});
  }
  if (seat < 1 || seat > kNumPlayers ||
      controllers_[seat - 1].kind != ControllerKind::kHuman) {
    throw ActionRejected("seat " + std::to_string(seat) + " is not a human seat",
                         ActionDescriptor{});
  }
  const ActionDescriptor legal = LegalActionsFor(seat);
  if (legal.empty()) {
    throw ActionRejected(SeatLabel(seat) + " has nothing to do right now", legal);
  }
  if (pending_) {
    throw ActionRejected("an intervention is pending", legal);
  }

  Output output{action.text, action.decision};
  if (legal.kind == ActionKind::kSpeak) {
    if (action.decision) throw ActionRejected("a speech is expected", legal);
    if (action.text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ActionRejected("speech text is empty", legal);
    }
  } else {
    if (!output.decision) {
      const Parsed<Decision> parsed = ParseDecision(action.text, legal);
      if (!parsed) {
        throw ActionRejected("could not read a decision: " + parsed.detail(), legal);
      }
      output.decision = *parsed;
    }
    const Parsed<Decision> check = ParseDecision(RenderDecision(*output.decision), legal);
    if (!check) throw ActionRejected("illegal decision: " + check.detail(), legal);
    output.decision = *check;
  }

  try {
    Commit(seat, legal.kind, output);
  } catch (const RuleViolation& e) {
    throw ActionRejected(e.what(), legal);
  }
  if (state_.phase == Phase::kFinished) status_ = Status::kFinished;
  else status_ = Status::kRunning;
}

void Match::ResolveIntervention(Resolution resolution, const std::string& text) {
  if (!pending_) throw std::logic_error("no pending intervention");
  PendingIntervention item = std::move(*pending_);
  pending_.reset();

  Json record;
  record["resolution"] = ResolutionName(resolution);
  switch (resolution) {
    case Resolution::kApprove:
      LogTrace(item.trace, item.proposed_text, record);
      Commit(item.seat, item.action, {item.proposed_text, item.proposed_decision});
      break;
    case Resolution::kEdit: {
      Output output{text, std::nullopt};
      if (item.action != ActionKind::kSpeak) {
        const ActionDescriptor legal = LegalActions(state_, item.seat);
        const Parsed<Decision> parsed = ParseDecision(text, legal);
        if (!parsed) {
          pending_ = std::move(item);
          throw ActionRejected("edited text has no legal decision: " + parsed.detail(),
                               legal);
        }
        output.decision = *parsed;
      }
      record["original"] = item.proposed_text;
      LogTrace(item.trace, text, record);
      Commit(item.seat, item.action, output);
      break;
    }
    case Resolution::kRejectAndReprompt:
      LogTrace(item.trace, "", record);
      break;
  }
  status_ = state_.phase == Phase::kFinished ? Status::kFinished : Status::kRunning;
}

void Match::Abort(const std::string& reason) {
  aborted_ = true;
  Json line;
  line["type"] = "aborted";
  line["error"] = reason;
  line["events"] = state_.history.size();
  log_.Append(std::move(line));
}

}  // namespace recon
