// Extraction of machine-readable decisions from free-text model output.
//
// Grammar: a decision is a token inside square brackets. Matching is
// case-insensitive and ignores surrounding whitespace; text outside brackets
// never counts.
//
//   team vote      [approve] | [disapprove]
//   quest vote     [success] | [fail]
//   proposal       [Player 1, Player 4]   (separators: "," ";" "and")
//   assassination  [Player 3]
//
// The same grammar is spelled out to the model in prompts/format_*.txt.

#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "recon/game_core.h"

namespace recon {

enum class ParseError {
  kNoToken,
  kConflict,
  kOutOfPolicy,
  kWrongCount,
  kOutOfRange,
  kIllegalTarget,
};
std::string_view ParseErrorName(ParseError error);

template <typename T>
class Parsed {
 public:
  Parsed(T value) : value_(std::move(value)) {}  // NOLINT
  Parsed(ParseError error, std::string detail)
      : error_(error), detail_(std::move(detail)) {}

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }
  const T& value() const { return *value_; }
  const T& operator*() const { return *value_; }
  ParseError error() const { return *error_; }
  const std::string& detail() const { return detail_; }

 private:
  std::optional<T> value_;
  std::optional<ParseError> error_;
  std::string detail_;
};

// Contents of every top-level [...] segment, in order of appearance.
std::vector<std::string> BracketContents(std::string_view text);

Parsed<TeamVote> ParseTeamVote(std::string_view text);
Parsed<QuestVote> ParseQuestVote(std::string_view text,
                                 const std::vector<QuestVote>& allowed);
Parsed<SeatSet> ParseProposal(std::string_view text, int num_players,
                              int team_size);
Parsed<Seat> ParseAssassination(std::string_view text,
                                const SeatSet& candidates, int num_players);

std::string RenderTeamVote(TeamVote vote);
std::string RenderQuestVote(QuestVote vote);
std::string RenderProposal(const SeatSet& team);
std::string RenderAssassination(Seat target);

// A decision of any phase, for code that handles them uniformly.
using Decision = std::variant<SeatSet, TeamVote, QuestVote, Seat>;

// Parses `text` against the descriptor's phase. kSpeak/kNone are not
// decisions and yield kNoToken.
Parsed<Decision> ParseDecision(std::string_view text,
                               const ActionDescriptor& descriptor);
std::string RenderDecision(const Decision& decision);
std::string DescribeDecision(const Decision& decision);

enum class ParseOutcome { kFirstTry, kRetry, kFallback };
std::string_view ParseOutcomeName(ParseOutcome outcome);
std::optional<ParseOutcome> ParseOutcomeFromName(std::string_view name);

struct ComplianceCounts {
  int attempts = 0;
  int first_try = 0;
  int retry_success = 0;
  int fallbacks = 0;

  double FirstTryRate() const {
    return attempts == 0 ? 0.0 : static_cast<double>(first_try) / attempts;
  }
  double SuccessRate() const {
    return attempts == 0
               ? 0.0
               : static_cast<double>(first_try + retry_success) / attempts;
  }
  ComplianceCounts& operator+=(const ComplianceCounts& other);
};

// Thread-safe accumulator keyed by (model, action kind).
class ComplianceStats {
 public:
  using Key = std::pair<std::string, ActionKind>;

  void Record(const std::string& model, ActionKind kind, ParseOutcome outcome);
  void Merge(const ComplianceStats& other);
  std::map<Key, ComplianceCounts> Snapshot() const;
  ComplianceCounts Total() const;

 private:
  mutable std::mutex mu_;
  std::map<Key, ComplianceCounts> counts_;
};

}  // namespace recon
