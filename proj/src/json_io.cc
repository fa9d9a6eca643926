#include "recon/json_io.h"

#include <cstdio>

namespace recon {
namespace {

template <typename T>
T Require(std::optional<T> value, const std::string& what) {
  if (!value) throw JsonFormatError("unrecognized " + what);
  return *value;
}

Json SeatSetJson(const SeatSet& seats) {
  Json out = Json::array();
  for (Seat seat : seats) out.push_back(seat);
  return out;
}

}  // namespace

std::string TeamVoteName(TeamVote vote) {
  return vote == TeamVote::kApprove ? "approve" : "disapprove";
}

std::string QuestVoteName(QuestVote vote) {
  return vote == QuestVote::kSuccess ? "success" : "fail";
}

std::optional<TeamVote> TeamVoteFromName(std::string_view name) {
  if (name == "approve") return TeamVote::kApprove;
  if (name == "disapprove") return TeamVote::kDisapprove;
  return std::nullopt;
}

std::optional<QuestVote> QuestVoteFromName(std::string_view name) {
  if (name == "success") return QuestVote::kSuccess;
  if (name == "fail") return QuestVote::kFail;
  return std::nullopt;
}

Json ToJson(const GameConfig& config) {
  return {{"num_players", config.num_players},
          {"team_sizes", config.team_sizes},
          {"fails_required", config.fails_required},
          {"max_consecutive_rejections", config.max_consecutive_rejections},
          {"speeches_per_proposal", config.speeches_per_proposal}};
}

GameConfig GameConfigFromJson(const Json& j) {
  GameConfig config;
  config.num_players = j.value("num_players", config.num_players);
  if (j.contains("team_sizes")) {
    const auto sizes = j.at("team_sizes").get<std::vector<int>>();
    if (sizes.size() != kNumQuests) {
      throw JsonFormatError("team_sizes: expected 5 entries");
    }
    std::copy(sizes.begin(), sizes.end(), config.team_sizes.begin());
  }
  if (j.contains("fails_required")) {
    const auto fails = j.at("fails_required").get<std::vector<int>>();
    if (fails.size() != kNumQuests) {
      throw JsonFormatError("fails_required: expected 5 entries");
    }
    std::copy(fails.begin(), fails.end(), config.fails_required.begin());
  }
  config.max_consecutive_rejections =
      j.value("max_consecutive_rejections", config.max_consecutive_rejections);
  config.speeches_per_proposal =
      j.value("speeches_per_proposal", config.speeches_per_proposal);
  return config;
}

Json ToJson(const PublicEvent& event) {
  Json j;
  j["kind"] = EventKindName(event.kind);
  j["quest"] = event.quest_index;
  if (event.actor) j["actor"] = *event.actor;
  switch (event.kind) {
    case EventKind::kSpeech:
    case EventKind::kPhaseMark:
      j["text"] = event.text;
      break;
    case EventKind::kProposal:
      j["team"] = SeatSetJson(event.team);
      break;
    case EventKind::kTeamVoteReveal: {
      j["team"] = SeatSetJson(event.team);
      Json votes = Json::object();
      for (const auto& [seat, vote] : event.team_votes) {
        votes[std::to_string(seat)] = TeamVoteName(vote);
      }
      j["votes"] = std::move(votes);
      j["approved"] = event.approved;
      break;
    }
    case EventKind::kQuestReveal:
      j["team"] = SeatSetJson(event.team);
      j["fail_count"] = event.fail_count;
      j["outcome"] =
          event.outcome == QuestOutcome::kSuccess ? "success" : "failure";
      break;
    case EventKind::kAssassinationReveal:
      j["target"] = *event.target;
      j["hit"] = event.hit;
      break;
  }
  return j;
}

PublicEvent PublicEventFromJson(const Json& j) {
  PublicEvent event;
  event.kind = Require(EventKindFromName(j.at("kind").get<std::string>()),
                       "event kind");
  event.quest_index = j.value("quest", 0);
  if (j.contains("actor")) event.actor = j.at("actor").get<Seat>();
  event.text = j.value("text", "");
  if (j.contains("team")) event.team = j.at("team").get<SeatSet>();
  if (j.contains("votes")) {
    for (const auto& [seat, vote] : j.at("votes").items()) {
      event.team_votes[std::stoi(seat)] =
          Require(TeamVoteFromName(vote.get<std::string>()), "team vote");
    }
  }
  event.approved = j.value("approved", false);
  event.fail_count = j.value("fail_count", 0);
  event.outcome = j.value("outcome", "success") == "success"
                      ? QuestOutcome::kSuccess
                      : QuestOutcome::kFailure;
  if (j.contains("target")) event.target = j.at("target").get<Seat>();
  event.hit = j.value("hit", false);
  return event;
}

Json ToJson(const QuestRecord& record) {
  return {{"quest", record.quest_index},
          {"team", SeatSetJson(record.team)},
          {"fail_count", record.fail_count},
          {"outcome",
           record.outcome == QuestOutcome::kSuccess ? "success" : "failure"}};
}

Json ToJson(const ActionDescriptor& descriptor) {
  Json j;
  j["kind"] = ActionKindName(descriptor.kind);
  j["num_players"] = descriptor.num_players;
  switch (descriptor.kind) {
    case ActionKind::kPropose:
      j["team_size"] = descriptor.team_size;
      j["candidates"] = SeatSetJson(descriptor.candidates);
      break;
    case ActionKind::kTeamVote:
      j["options"] = {"approve", "disapprove"};
      break;
    case ActionKind::kQuestVote: {
      Json options = Json::array();
      for (QuestVote vote : descriptor.quest_votes) {
        options.push_back(QuestVoteName(vote));
      }
      j["options"] = std::move(options);
      break;
    }
    case ActionKind::kAssassinate:
      j["candidates"] = SeatSetJson(descriptor.candidates);
      break;
    default:
      break;
  }
  return j;
}

ActionDescriptor ActionDescriptorFromJson(const Json& j) {
  ActionDescriptor descriptor;
  const std::string kind = j.at("kind").get<std::string>();
  for (ActionKind k : {ActionKind::kNone, ActionKind::kPropose, ActionKind::kSpeak,
                       ActionKind::kTeamVote, ActionKind::kQuestVote,
                       ActionKind::kAssassinate}) {
    if (ActionKindName(k) == kind) descriptor.kind = k;
  }
  descriptor.num_players = j.value("num_players", kNumPlayers);
  descriptor.team_size = j.value("team_size", 0);
  if (j.contains("candidates")) {
    descriptor.candidates = j.at("candidates").get<SeatSet>();
  }
  if (descriptor.kind == ActionKind::kQuestVote) {
    for (const Json& option : j.at("options")) {
      descriptor.quest_votes.push_back(
          Require(QuestVoteFromName(option.get<std::string>()), "quest vote"));
    }
  }
  return descriptor;
}

Json ToJson(const KnowledgeView& view) {
  Json j;
  j["seat"] = view.self_seat;
  j["role"] = RoleName(view.self_role);
  j["known_evil"] = SeatSetJson(view.known_evil);
  if (view.merlin_morgana_pair) {
    j["merlin_or_morgana"] = {view.merlin_morgana_pair->first,
                              view.merlin_morgana_pair->second};
  }
  return j;
}

Json ToJson(const Decision& decision) {
  return std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SeatSet>) {
          return {{"kind", "propose"}, {"team", SeatSetJson(d)}};
        }
        if constexpr (std::is_same_v<T, TeamVote>) {
          return {{"kind", "team_vote"}, {"vote", TeamVoteName(d)}};
        }
        if constexpr (std::is_same_v<T, QuestVote>) {
          return {{"kind", "quest_vote"}, {"vote", QuestVoteName(d)}};
        }
        if constexpr (std::is_same_v<T, Seat>) {
          return {{"kind", "assassinate"}, {"target", d}};
        }
      },
      decision);
}

Decision DecisionFromJson(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "propose") return j.at("team").get<SeatSet>();
  if (kind == "team_vote") {
    return Require(TeamVoteFromName(j.at("vote").get<std::string>()), "team vote");
  }
  if (kind == "quest_vote") {
    return Require(QuestVoteFromName(j.at("vote").get<std::string>()),
                   "quest vote");
  }
  if (kind == "assassinate") return j.at("target").get<Seat>();
  throw JsonFormatError("unrecognized decision kind '" + kind + "'");
}

Json PublicStateJson(const GameState& state) {
  Json j;
  j["config"] = ToJson(state.config);
  j["phase"] = PhaseName(state.phase);
  j["quest_index"] = state.quest_index;
  j["leader"] = state.leader;
  j["consecutive_rejections"] = state.consecutive_rejections;
  j["proposals_made"] = state.proposals_made;
  j["speeches_made"] = state.speeches_made;
  Json quests = Json::array();
  for (const QuestRecord& record : state.quest_records) {
    quests.push_back(ToJson(record));
  }
  j["quest_records"] = std::move(quests);
  j["pending_proposal"] = state.pending_proposal
                              ? SeatSetJson(*state.pending_proposal)
                              : Json(nullptr);
  j["history_length"] = state.history.size();
  j["winner"] = state.winner ? Json(SideName(*state.winner)) : Json(nullptr);
  j["finish_cause"] =
      state.finish_cause ? Json(FinishCauseName(*state.finish_cause)) : Json(nullptr);
  if (state.phase == Phase::kDiscussion) j["next_speaker"] = state.NextSpeaker();
  return j;
}

Json FullStateJson(const GameState& state) {
  Json j = PublicStateJson(state);
  Json seats = Json::array();
  for (Role role : state.seats) seats.push_back(RoleName(role));
  j["seats"] = std::move(seats);
  Json history = Json::array();
  for (const PublicEvent& event : state.history) history.push_back(ToJson(event));
  j["history"] = std::move(history);
  return j;
}

std::string StateDigest(const GameState& state) {
  const std::string text = FullStateJson(state).dump();
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

std::array<Role, kNumPlayers> SeatsFromJson(const Json& j) {
  if (!j.is_array() || j.size() != kNumPlayers) {
    throw JsonFormatError("seats: expected 6 role names");
  }
  std::array<Role, kNumPlayers> seats{};
  for (int i = 0; i < kNumPlayers; ++i) {
    seats[i] = Require(RoleFromName(j[i].get<std::string>()), "role name");
  }
  return seats;
}

}  // namespace recon
