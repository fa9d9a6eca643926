// Tournaments between agent variants and the pairwise LLM judge.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recon/agent.h"
#include "recon/game_log.h"
#include "recon/gateway.h"
#include "recon/match.h"

namespace recon {

struct WilsonInterval {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const WilsonInterval&) const = default;
};
// 95% interval by default. n == 0 gives [0, 1].
WilsonInterval Wilson(int successes, int n, double z = 1.96);

struct MatchupSpec {
  Side tested_side = Side::kGood;
  AgentVariant tested_variant = AgentVariant::ReCon();
  // Unset: CoT opposes a tested good side, ReCon a tested evil side.
  std::optional<AgentVariant> opponent_variant;
  int n_games = 0;
  std::vector<std::uint64_t> seeds;  // empty: 0 .. n_games-1

  AgentVariant Opponent() const;
  std::vector<std::uint64_t> Seeds() const;
  std::vector<std::string> Validate() const;
};

struct GameOutcome {
  std::uint64_t seed = 0;
  std::optional<Side> winner;
  std::optional<FinishCause> cause;
  bool aborted = false;
  std::string error;
  std::string log_file;  // empty when logs are not written

  bool operator==(const GameOutcome&) const = default;
};

struct TournamentResult {
  Side tested_side = Side::kGood;
  int wins = 0;
  int n_games = 0;  // finished games; aborted games are excluded
  int aborted = 0;
  double success_rate = 0.0;
  WilsonInterval interval;
  std::vector<GameOutcome> games;  // in seed order, aborted ones included

  bool operator==(const TournamentResult&) const = default;
};

struct TournamentOptions {
  GameConfig game;
  std::optional<std::filesystem::path> log_dir;
  int parallelism = 1;
  ComplianceStats* stats = nullptr;
  std::vector<AgentVariant> shadow_methods;
};

TournamentResult RunTournament(const MatchupSpec& spec, const Gateway& gateway,
                               const PromptCatalog& catalog,
                               const TournamentOptions& options);

// Recomputes a result from finished logs.
TournamentResult TournamentFromLogs(const std::vector<GameLog>& logs, Side tested_side);

std::string FormatTournament(const MatchupSpec& spec, const TournamentResult& result);
std::string TournamentCsv(const TournamentResult& result);

// --- judge dataset ---------------------------------------------------------

struct ResponseBundle {
  std::string speech;
  std::string assumption;  // G' when present
  std::string thought;     // T', T or the CoT thought
  std::string perception;  // O when present

  // Speech preceded by whichever contemplation fields exist.
  std::string WithContemplation() const;
};

struct DatasetItem {
  std::string context_id;
  Seat seat = 0;
  Role role = Role::kServant;
  std::string context;
  std::map<std::string, ResponseBundle> responses;  // by method name
};

struct Dataset {
  std::vector<DatasetItem> items;
  int skipped = 0;  // contexts missing at least one method

  int ResponseCount() const;
};

// Groups the shadow records of `logs` by context. Items lacking a response
// from any of `methods` are skipped and counted.
Dataset CollectDataset(const std::vector<GameLog>& logs,
                       const std::vector<std::string>& methods);

// --- judge -----------------------------------------------------------------

enum class MetricId { kCCL, kLG, kCTR, kPRS, kINF, kCRT };
enum class Corpus { kSpeechOnly, kSpeechAndContemplation };

struct JudgeMetric {
  MetricId id;
  std::string_view code;         // "CCL"
  std::string_view name;         // "concealment"
  std::string_view template_id;  // prompt catalog id of the definition
  bool speech_only;              // not judged on contemplation
  std::vector<Role> role_filter; // empty: every role
};

const std::vector<JudgeMetric>& JudgeMetrics();
const JudgeMetric& MetricInfo(MetricId id);
std::optional<MetricId> MetricFromCode(std::string_view code);
std::string_view CorpusName(Corpus corpus);
std::optional<Corpus> CorpusFromName(std::string_view name);
bool MetricApplies(MetricId metric, Corpus corpus, Role role);

class JudgePreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ComparisonRecord {
  std::string context_id;
  std::string method_a;
  std::string method_b;
  MetricId metric = MetricId::kLG;
  Corpus corpus = Corpus::kSpeechOnly;
  bool a_presented_first = true;
  // 'A' when method_a is preferred, 'B' when method_b is. Always one of the two.
  char verdict = 'A';
  std::string rationale;

  const std::string& Winner() const { return verdict == 'A' ? method_a : method_b; }
  bool operator==(const ComparisonRecord&) const = default;
};

Json ToJson(const ComparisonRecord& record);
ComparisonRecord ComparisonRecordFromJson(const Json& j);

// Reads the verdict from a judge reply: exactly one bracket token that is
// "A" or "B" (case-insensitive). Refers to presentation order.
std::optional<char> ParseVerdict(std::string_view reply);

struct JudgeOptions {
  std::uint64_t seed = 0;
  int max_attempts = 3;
};

// Asks the judge model which of two methods' responses is better on one
// metric. Presentation order is drawn from the seed and the comparison's
// identity. Returns nullopt when no verdict could be parsed. Throws
// JudgePreconditionError when the metric does not apply.
std::optional<ComparisonRecord> JudgePair(const DatasetItem& item,
                                          const std::string& method_a,
                                          const std::string& method_b,
                                          MetricId metric, Corpus corpus,
                                          const Gateway& gateway,
                                          const PromptCatalog& catalog,
                                          const JudgeOptions& options);

struct JudgeRun {
  std::vector<ComparisonRecord> records;
  int dropped = 0;  // no parseable verdict
};

// All unordered pairs of `methods`, in list order.
std::vector<std::pair<std::string, std::string>> AllPairs(
    const std::vector<std::string>& methods);

JudgeRun RunJudging(const Dataset& dataset,
                    const std::vector<std::pair<std::string, std::string>>& pairs,
                    const std::vector<MetricId>& metrics,
                    const std::vector<Corpus>& corpora, const Gateway& gateway,
                    const PromptCatalog& catalog, const JudgeOptions& options,
                    int parallelism = 1);

struct PreferenceRow {
  MetricId metric;
  Corpus corpus;
  std::string method;
  int won = 0;
  int participated = 0;
  double percentage = 0.0;  // won / participated
  WilsonInterval interval;
};

// One row per (corpus, metric, method) with at least one comparison.
std::vector<PreferenceRow> PreferenceTable(const std::vector<ComparisonRecord>& records);

struct HeadToHead {
  MetricId metric;
  Corpus corpus;
  std::string method_a;
  std::string method_b;
  int a_wins = 0;
  int b_wins = 0;

  double PrefA() const { return static_cast<double>(a_wins) / (a_wins + b_wins); }
  double PrefB() const { return static_cast<double>(b_wins) / (a_wins + b_wins); }
};
// Method names in each pair are ordered lexicographically.
std::vector<HeadToHead> HeadToHeadTable(const std::vector<ComparisonRecord>& records);

std::string FormatPreferenceTable(const std::vector<PreferenceRow>& rows);
std::string PreferenceCsv(const std::vector<PreferenceRow>& rows);

}  // namespace recon
