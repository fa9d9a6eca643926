#include "recon/decision_parser.h"

#include <algorithm>
#include <cctype>

namespace recon {
namespace {

std::string Lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view Trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) {
    text.remove_prefix(1);
  }
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  return text;
}

// Finds which of `tokens` appear bracketed. Returns the index of the single
// token present, or an error when none or several distinct ones appear.
Parsed<int> MatchExclusiveToken(std::string_view text,
                                const std::vector<std::string_view>& tokens) {
  std::vector<bool> seen(tokens.size(), false);
  for (const std::string& content : BracketContents(text)) {
    const std::string normalized = Lower(Trim(content));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (normalized == tokens[i]) seen[i] = true;
    }
  }
  const auto count = std::count(seen.begin(), seen.end(), true);
  if (count == 0) return {ParseError::kNoToken, "no bracketed decision token"};
  if (count > 1) {
    return {ParseError::kConflict, "conflicting bracketed decision tokens"};
  }
  return static_cast<int>(std::find(seen.begin(), seen.end(), true) -
                          seen.begin());
}

// "Player 3", "player3", "P3", "#3", "3".
std::optional<int> ParsePlayerId(std::string_view item) {
  std::string lowered = Lower(Trim(item));
  std::string_view rest = lowered;
  if (rest.rfind("player", 0) == 0) {
    rest.remove_prefix(6);
  } else if (rest.rfind("p", 0) == 0) {
    rest.remove_prefix(1);
  }
  rest = Trim(rest);
  if (!rest.empty() && rest.front() == '#') rest.remove_prefix(1);
  if (rest.empty() || rest.size() > 3) return std::nullopt;
  if (!std::all_of(rest.begin(), rest.end(),
                   [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  return std::stoi(std::string(rest));
}

// A bracket body that is nothing but player ids, e.g. "Player 1, Player 4".
std::optional<std::vector<int>> ParsePlayerList(std::string_view content) {
  std::string normalized = Lower(content);
  // Treat the word "and" as a separator.
  for (std::size_t pos = normalized.find(" and "); pos != std::string::npos;
       pos = normalized.find(" and ", pos)) {
    normalized.replace(pos, 5, ",");
  }
  std::vector<int> ids;
  std::size_t start = 0;
  while (start <= normalized.size()) {
    std::size_t end = normalized.find_first_of(",;", start);
    if (end == std::string::npos) end = normalized.size();
    const std::string_view item =
        Trim(std::string_view(normalized).substr(start, end - start));
    if (!item.empty()) {
      const std::optional<int> id = ParsePlayerId(item);
      if (!id) return std::nullopt;
      ids.push_back(*id);
    }
    start = end + 1;
  }
  if (ids.empty()) return std::nullopt;
  return ids;
}

std::vector<std::vector<int>> PlayerLists(std::string_view text) {
  std::vector<std::vector<int>> lists;
  for (const std::string& content : BracketContents(text)) {
    if (auto ids = ParsePlayerList(content)) lists.push_back(std::move(*ids));
  }
  return lists;
}

std::vector<int> Normalized(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

std::string_view ParseErrorName(ParseError error) {
  switch (error) {
    case ParseError::kNoToken: return "no_token";
    case ParseError::kConflict: return "conflict";
    case ParseError::kOutOfPolicy: return "out_of_policy";
    case ParseError::kWrongCount: return "wrong_count";
    case ParseError::kOutOfRange: return "out_of_range";
    case ParseError::kIllegalTarget: return "illegal_target";
  }
  return "?";
}

std::vector<std::string> BracketContents(std::string_view text) {
  std::vector<std::string> contents;
  std::size_t open = std::string_view::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '[') {
      open = i;
    } else if (text[i] == ']' && open != std::string_view::npos) {
      contents.emplace_back(text.substr(open + 1, i - open - 1));
      open = std::string_view::npos;
    }
  }
  return contents;
}

Parsed<TeamVote> ParseTeamVote(std::string_view text) {
  const Parsed<int> match = MatchExclusiveToken(text, {"approve", "disapprove"});
  if (!match) return {match.error(), match.detail()};
  return *match == 0 ? TeamVote::kApprove : TeamVote::kDisapprove;
}

Parsed<QuestVote> ParseQuestVote(std::string_view text,
                                 const std::vector<QuestVote>& allowed) {
  const Parsed<int> match = MatchExclusiveToken(text, {"success", "fail"});
  if (!match) return {match.error(), match.detail()};
  const QuestVote vote = *match == 0 ? QuestVote::kSuccess : QuestVote::kFail;
  if (std::find(allowed.begin(), allowed.end(), vote) == allowed.end()) {
    return {ParseError::kOutOfPolicy,
            RenderQuestVote(vote) + " is not allowed for this seat"};
  }
  return vote;
}

Parsed<SeatSet> ParseProposal(std::string_view text, int num_players,
                              int team_size) {
  const std::vector<std::vector<int>> lists = PlayerLists(text);
  if (lists.empty()) return {ParseError::kNoToken, "no bracketed player list"};
  const std::vector<int> chosen = lists.back();
  for (const auto& list : lists) {
    if (Normalized(list) != Normalized(chosen)) {
      return {ParseError::kConflict, "several different bracketed teams"};
    }
  }
  for (int id : chosen) {
    if (id < 1 || id > num_players) {
      return {ParseError::kOutOfRange,
              "player " + std::to_string(id) + " does not exist"};
    }
  }
  SeatSet team = Normalized(chosen);
  if (static_cast<int>(team.size()) != team_size) {
    return {ParseError::kWrongCount,
            "expected " + std::to_string(team_size) + " distinct players, got " +
                std::to_string(team.size())};
  }
  return team;
}

Parsed<Seat> ParseAssassination(std::string_view text,
                                const SeatSet& candidates, int num_players) {
  std::vector<int> singles;
  for (const auto& list : PlayerLists(text)) {
    if (list.size() == 1) singles.push_back(list.front());
  }
  if (singles.empty()) return {ParseError::kNoToken, "no bracketed player"};
  if (Normalized(singles).size() > 1) {
    return {ParseError::kConflict, "several different bracketed targets"};
  }
  const Seat target = singles.back();
  if (target < 1 || target > num_players) {
    return {ParseError::kOutOfRange,
            "player " + std::to_string(target) + " does not exist"};
  }
  if (!std::binary_search(candidates.begin(), candidates.end(), target)) {
    return {ParseError::kIllegalTarget,
            SeatLabel(target) + " is not a legal target"};
  }
  return target;
}

std::string RenderTeamVote(TeamVote vote) {
  return vote == TeamVote::kApprove ? "[approve]" : "[disapprove]";
}

std::string RenderQuestVote(QuestVote vote) {
  return vote == QuestVote::kSuccess ? "[success]" : "[fail]";
}

std::string RenderProposal(const SeatSet& team) {
  return "[" + SeatListLabel(team) + "]";
}

std::string RenderAssassination(Seat target) {
  return "[" + SeatLabel(target) + "]";
}

Parsed<Decision> ParseDecision(std::string_view text,
                               const ActionDescriptor& descriptor) {
  auto lift = [](const auto& parsed) -> Parsed<Decision> {
    if (!parsed) return {parsed.error(), parsed.detail()};
    return Decision(*parsed);
  };
  switch (descriptor.kind) {
    case ActionKind::kPropose:
      return lift(ParseProposal(text, descriptor.num_players,
                                descriptor.team_size));
    case ActionKind::kTeamVote:
      return lift(ParseTeamVote(text));
    case ActionKind::kQuestVote:
      return lift(ParseQuestVote(text, descriptor.quest_votes));
    case ActionKind::kAssassinate:
      return lift(ParseAssassination(text, descriptor.candidates,
                                     descriptor.num_players));
    default:
      return {ParseError::kNoToken, "not a decision phase"};
  }
}

std::string RenderDecision(const Decision& decision) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SeatSet>) return RenderProposal(d);
        if constexpr (std::is_same_v<T, TeamVote>) return RenderTeamVote(d);
        if constexpr (std::is_same_v<T, QuestVote>) return RenderQuestVote(d);
        if constexpr (std::is_same_v<T, Seat>) return RenderAssassination(d);
      },
      decision);
}

std::string DescribeDecision(const Decision& decision) {
  return std::visit(
      [](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, SeatSet>) return "team " + SeatListLabel(d);
        if constexpr (std::is_same_v<T, TeamVote>) {
          return d == TeamVote::kApprove ? "approve" : "disapprove";
        }
        if constexpr (std::is_same_v<T, QuestVote>) {
          return d == QuestVote::kSuccess ? "success" : "fail";
        }
        if constexpr (std::is_same_v<T, Seat>) return "target " + SeatLabel(d);
      },
      decision);
}

std::string_view ParseOutcomeName(ParseOutcome outcome) {
  switch (outcome) {
    case ParseOutcome::kFirstTry: return "first_try";
    case ParseOutcome::kRetry: return "retry";
    case ParseOutcome::kFallback: return "fallback";
  }
  return "?";
}

std::optional<ParseOutcome> ParseOutcomeFromName(std::string_view name) {
  for (ParseOutcome outcome :
       {ParseOutcome::kFirstTry, ParseOutcome::kRetry, ParseOutcome::kFallback}) {
    if (ParseOutcomeName(outcome) == name) return outcome;
  }
  return std::nullopt;
}

ComplianceCounts& ComplianceCounts::operator+=(const ComplianceCounts& other) {
  attempts += other.attempts;
  first_try += other.first_try;
  retry_success += other.retry_success;
  fallbacks += other.fallbacks;
  return *this;
}

void ComplianceStats::Record(const std::string& model, ActionKind kind,
                             ParseOutcome outcome) {
  std::lock_guard<std::mutex> lock(mu_);
  ComplianceCounts& counts = counts_[{model, kind}];
  counts.attempts += 1;
  switch (outcome) {
    case ParseOutcome::kFirstTry: counts.first_try += 1; break;
    case ParseOutcome::kRetry: counts.retry_success += 1; break;
    case ParseOutcome::kFallback: counts.fallbacks += 1; break;
  }
}

void ComplianceStats::Merge(const ComplianceStats& other) {
  const auto snapshot = other.Snapshot();
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& [key, counts] : snapshot) counts_[key] += counts;
}

std::map<ComplianceStats::Key, ComplianceCounts> ComplianceStats::Snapshot()
    const {
  std::lock_guard<std::mutex> lock(mu_);
  return counts_;
}

ComplianceCounts ComplianceStats::Total() const {
  std::lock_guard<std::mutex> lock(mu_);
  ComplianceCounts total;
  for (const auto& [key, counts] : counts_) total += counts;
  return total;
}

}  // namespace recon
