// JSON forms of the rules-engine and parser types, shared by the game log,
// the service and the scripted providers.

#pragma once

#include <json.hpp>

#include "recon/decision_parser.h"
#include "recon/game_core.h"

namespace recon {

using Json = nlohmann::json;

class JsonFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json ToJson(const GameConfig& config);
GameConfig GameConfigFromJson(const Json& j);

Json ToJson(const PublicEvent& event);
PublicEvent PublicEventFromJson(const Json& j);

Json ToJson(const QuestRecord& record);

Json ToJson(const ActionDescriptor& descriptor);
ActionDescriptor ActionDescriptorFromJson(const Json& j);

Json ToJson(const KnowledgeView& view);

Json ToJson(const Decision& decision);
Decision DecisionFromJson(const Json& j);

std::string TeamVoteName(TeamVote vote);
std::string QuestVoteName(QuestVote vote);
std::optional<TeamVote> TeamVoteFromName(std::string_view name);
std::optional<QuestVote> QuestVoteFromName(std::string_view name);

// Everything anyone at the table can see: no role assignment.
Json PublicStateJson(const GameState& state);
// Full state including seats; used for replay digests.
Json FullStateJson(const GameState& state);

// 64-bit FNV-1a over the compact dump of FullStateJson, as 16 hex digits.
std::string StateDigest(const GameState& state);

std::array<Role, kNumPlayers> SeatsFromJson(const Json& j);

}  // namespace recon
