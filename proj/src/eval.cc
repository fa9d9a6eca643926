#include "recon/eval.h"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "recon/scripted_policy.h"

namespace recon {
namespace {

std::string Fixed(double value, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

// Runs fn(i) for i in [0, n) on up to `parallelism` threads.
template <typename F>
void ParallelFor(int n, int parallelism, F fn) {
  const int workers = std::max(1, std::min(parallelism, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

void Finalize(TournamentResult& result) {
  result.wins = 0;
  result.n_games = 0;
  result.aborted = 0;
  for (const GameOutcome& game : result.games) {
    if (game.aborted) {
      ++result.aborted;
      continue;
    }
    ++result.n_games;
    if (game.winner == result.tested_side) ++result.wins;
  }
  result.success_rate =
      result.n_games == 0 ? 0.0 : static_cast<double>(result.wins) / result.n_games;
  result.interval = Wilson(result.wins, result.n_games);
}

std::string ThoughtOf(const ContemplationTrace& trace) {
  if (trace.refined_thought) return trace.refined_thought->text;
  if (trace.initial_thought) return trace.initial_thought->text;
  if (trace.cot_response) {
    if (auto parts = SplitThoughtAndSpeech(trace.cot_response->text)) return parts->thought;
  }
  return "";
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

WilsonInterval Wilson(int successes, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

AgentVariant MatchupSpec::Opponent() const {
  if (opponent_variant) return *opponent_variant;
  return tested_side == Side::kGood ? AgentVariant::CoT() : AgentVariant::ReCon();
}

std::vector<std::uint64_t> MatchupSpec::Seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n_games; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

std::vector<std::string> MatchupSpec::Validate() const {
  std::vector<std::string> errors;
  if (n_games < 1) errors.push_back("n_games: must be >= 1");
  if (!seeds.empty() && static_cast<int>(seeds.size()) != n_games) {
    errors.push_back("seeds: expected one seed per game");
  }
  for (const std::string& e : tested_variant.Validate()) {
    errors.push_back("tested_variant: " + e);
  }
  for (const std::string& e : Opponent().Validate()) {
    errors.push_back("opponent_variant: " + e);
  }
  return errors;
}

TournamentResult RunTournament(const MatchupSpec& spec, const Gateway& gateway,
                               const PromptCatalog& catalog,
                               const TournamentOptions& options) {
  if (const auto errors = spec.Validate(); !errors.empty()) {
    throw std::invalid_argument("matchup: " + errors.front());
  }
  const std::vector<std::uint64_t> seeds = spec.Seeds();
  const SeatController tested{ControllerKind::kAgent, spec.tested_variant};
  const SeatController opponent{ControllerKind::kAgent, spec.Opponent()};

  TournamentResult result;
  result.tested_side = spec.tested_side;
  result.games.resize(seeds.size());
  ParallelFor(static_cast<int>(seeds.size()), options.parallelism, [&](int i) {
    MatchOptions match_options;
    match_options.game = options.game;
    match_options.seed = seeds[i];
    match_options.seats.good = spec.tested_side == Side::kGood ? tested : opponent;
    match_options.seats.evil = spec.tested_side == Side::kGood ? opponent : tested;
    match_options.shadow_methods = options.shadow_methods;

    GameOutcome& outcome = result.games[i];
    outcome.seed = seeds[i];
    Match match(match_options, gateway, catalog, options.stats);
    try {
      match.RunToCompletion();
      outcome.winner = match.state().winner;
      outcome.cause = match.state().finish_cause;
    } catch (const std::exception& e) {
      outcome.aborted = true;
      outcome.error = e.what();
      match.Abort(e.what());
      spdlog::warn("game with seed {} aborted and excluded: {}", seeds[i], e.what());
    }
    if (options.log_dir) {
      const std::string name = match_options.seats.good.variant.Name() + "-vs-" +
                               match_options.seats.evil.variant.Name() + "-seed" +
                               std::to_string(seeds[i]) + ".jsonl";
      match.log().WriteFile(*options.log_dir / name);
      outcome.log_file = name;
    }
  });
  Finalize(result);
  return result;
}

TournamentResult TournamentFromLogs(const std::vector<GameLog>& logs, Side tested_side) {
  TournamentResult result;
  result.tested_side = tested_side;
  for (const GameLog& log : logs) {
    GameOutcome outcome;
    if (const Json* header = log.Header()) outcome.seed = header->value("seed", 0ULL);
    const Json* footer = log.Footer();
    if (footer == nullptr || log.Aborted()) {
      outcome.aborted = true;
    } else {
      outcome.winner = SideFromName(footer->value("winner", ""));
      outcome.cause = FinishCauseFromName(footer->value("cause", ""));
    }
    result.games.push_back(outcome);
  }
  Finalize(result);
  return result;
}

std::string FormatTournament(const MatchupSpec& spec, const TournamentResult& result) {
  std::ostringstream out;
  out << "tested: " << spec.tested_variant.Name() << " as "
      << SideName(spec.tested_side) << ", opponent: " << spec.Opponent().Name() << "\n";
  out << "games: " << result.n_games << " (aborted " << result.aborted << ")\n";
  out << "wins: " << result.wins << "\n";
  out << "success rate: " << Fixed(result.success_rate) << "  95% CI ["
      << Fixed(result.interval.low) << ", " << Fixed(result.interval.high) << "]\n";
  return out.str();
}

std::string TournamentCsv(const TournamentResult& result) {
  std::string out = "seed,winner,cause,aborted,tested_win,log_file\n";
  for (const GameOutcome& game : result.games) {
    out += std::to_string(game.seed) + ",";
    out += game.winner ? std::string(SideName(*game.winner)) : "";
    out += ",";
    out += game.cause ? std::string(FinishCauseName(*game.cause)) : "";
    out += std::string(",") + (game.aborted ? "1" : "0") + ",";
    out += std::string(!game.aborted && game.winner == result.tested_side ? "1" : "0");
    out += "," + CsvField(game.log_file) + "\n";
  }
  return out;
}

std::string ResponseBundle::WithContemplation() const {
  std::string out;
  if (!assumption.empty()) out += "Role assumption: " + assumption + "\n";
  if (!thought.empty()) out += "Thought: " + thought + "\n";
  if (!perception.empty()) out += "Perception analysis: " + perception + "\n";
  return out + "Speech: " + speech;
}

int Dataset::ResponseCount() const {
  int n = 0;
  for (const DatasetItem& item : items) n += static_cast<int>(item.responses.size());
  return n;
}

Dataset CollectDataset(const std::vector<GameLog>& logs,
                       const std::vector<std::string>& methods) {
  std::vector<DatasetItem> ordered;
  std::map<std::string, std::size_t> index;
  for (const GameLog& log : logs) {
    for (const Json& line : log.lines()) {
      if (line.value("type", "") != "shadow") continue;
      const std::string id = line.at("context_id").get<std::string>();
      auto [it, inserted] = index.emplace(id, ordered.size());
      if (inserted) {
        DatasetItem item;
        item.context_id = id;
        item.seat = line.at("seat").get<Seat>();
        item.role = RoleFromName(line.at("role").get<std::string>()).value_or(Role::kServant);
        item.context = line.value("context", "");
        ordered.push_back(std::move(item));
      }
      const ContemplationTrace trace = ContemplationTraceFromJson(line.at("trace"));
      ResponseBundle bundle;
      bundle.speech = line.value("response", "");
      if (trace.updated_assumption) bundle.assumption = trace.updated_assumption->text;
      bundle.thought = ThoughtOf(trace);
      if (trace.perception_analysis) bundle.perception = trace.perception_analysis->text;
      ordered[it->second].responses[line.at("method").get<std::string>()] = bundle;
    }
  }

  Dataset dataset;
  for (DatasetItem& item : ordered) {
    bool complete = true;
    for (const std::string& method : methods) {
      complete = complete && item.responses.count(method) > 0;
    }
    if (!complete) {
      ++dataset.skipped;
      continue;
    }
    std::erase_if(item.responses, [&](const auto& kv) {
      return std::find(methods.begin(), methods.end(), kv.first) == methods.end();
    });
    dataset.items.push_back(std::move(item));
  }
  if (dataset.skipped > 0) {
    spdlog::warn("{} judge contexts skipped: a method response was missing",
                 dataset.skipped);
  }
  return dataset;
}

const std::vector<JudgeMetric>& JudgeMetrics() {
  static const std::vector<JudgeMetric> kMetrics = {
      {MetricId::kCCL, "CCL", "concealment", "metric_ccl", true,
       {Role::kMerlin, Role::kPercival}},
      {MetricId::kLG, "LG", "logic", "metric_lg", false, {}},
      {MetricId::kCTR, "CTR", "contribution", "metric_ctr", false, {}},
      {MetricId::kPRS, "PRS", "persuasiveness", "metric_prs", false, {}},
      {MetricId::kINF, "INF", "information", "metric_inf", false, {}},
      {MetricId::kCRT, "CRT", "creativity", "metric_crt", false, {}},
  };
  return kMetrics;
}

const JudgeMetric& MetricInfo(MetricId id) {
  for (const JudgeMetric& metric : JudgeMetrics()) {
    if (metric.id == id) return metric;
  }
  throw std::invalid_argument("unknown metric");
}

std::optional<MetricId> MetricFromCode(std::string_view code) {
  for (const JudgeMetric& metric : JudgeMetrics()) {
    if (metric.code.size() != code.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < code.size(); ++i) {
      same = same && std::toupper(static_cast<unsigned char>(code[i])) == metric.code[i];
    }
    if (same) return metric.id;
  }
  return std::nullopt;
}

std::string_view CorpusName(Corpus corpus) {
  return corpus == Corpus::kSpeechOnly ? "speech" : "speech_and_contemplation";
}

std::optional<Corpus> CorpusFromName(std::string_view name) {
  if (name == "speech") return Corpus::kSpeechOnly;
  if (name == "speech_and_contemplation") return Corpus::kSpeechAndContemplation;
  return std::nullopt;
}

bool MetricApplies(MetricId metric, Corpus corpus, Role role) {
  const JudgeMetric& info = MetricInfo(metric);
  if (info.speech_only && corpus != Corpus::kSpeechOnly) return false;
  if (info.role_filter.empty()) return true;
  return std::find(info.role_filter.begin(), info.role_filter.end(), role) !=
         info.role_filter.end();
}

Json ToJson(const ComparisonRecord& record) {
  return {{"context_id", record.context_id},
          {"method_a", record.method_a},
          {"method_b", record.method_b},
          {"metric", MetricInfo(record.metric).code},
          {"corpus", CorpusName(record.corpus)},
          {"a_presented_first", record.a_presented_first},
          {"verdict", std::string(1, record.verdict)},
          {"rationale", record.rationale}};
}

ComparisonRecord ComparisonRecordFromJson(const Json& j) {
  ComparisonRecord record;
  record.context_id = j.at("context_id").get<std::string>();
  record.method_a = j.at("method_a").get<std::string>();
  record.method_b = j.at("method_b").get<std::string>();
  const auto metric = MetricFromCode(j.at("metric").get<std::string>());
  const auto corpus = CorpusFromName(j.at("corpus").get<std::string>());
  const std::string verdict = j.at("verdict").get<std::string>();
  if (!metric || !corpus || (verdict != "A" && verdict != "B")) {
    throw JsonFormatError("malformed comparison record");
  }
  record.metric = *metric;
  record.corpus = *corpus;
  record.a_presented_first = j.value("a_presented_first", true);
  record.verdict = verdict[0];
  record.rationale = j.value("rationale", "");
  return record;
}

std::optional<char> ParseVerdict(std::string_view reply) {
  std::optional<char> verdict;
  for (const std::string& token : BracketContents(reply)) {
    std::string t;
    for (char c : token) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        t += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
    }
    if (t != "A" && t != "B") continue;
    if (verdict && *verdict != t[0]) return std::nullopt;
    verdict = t[0];
  }
  return verdict;
}

std::optional<ComparisonRecord> JudgePair(const DatasetItem& item,
                                          const std::string& method_a,
                                          const std::string& method_b,
                                          MetricId metric, Corpus corpus,
                                          const Gateway& gateway,
                                          const PromptCatalog& catalog,
                                          const JudgeOptions& options) {
  const JudgeMetric& info = MetricInfo(metric);
  if (!MetricApplies(metric, corpus, item.role)) {
    throw JudgePreconditionError(
        std::string(info.code) + " does not apply to a " +
        std::string(RoleName(item.role)) + " context on the " +
        std::string(CorpusName(corpus)) + " corpus");
  }
  const auto a = item.responses.find(method_a);
  const auto b = item.responses.find(method_b);
  if (a == item.responses.end() || b == item.responses.end()) {
    throw JudgePreconditionError("context " + item.context_id +
                                 " lacks a response for " + method_a + " or " + method_b);
  }
  auto text = [&](const ResponseBundle& bundle) {
    return corpus == Corpus::kSpeechOnly ? bundle.speech : bundle.WithContemplation();
  };

  ComparisonRecord record;
  record.context_id = item.context_id;
  record.method_a = method_a;
  record.method_b = method_b;
  record.metric = metric;
  record.corpus = corpus;
  std::mt19937_64 rng(Fnv1a(item.context_id + "|" + method_a + "|" + method_b + "|" +
                                std::string(info.code) + "|" +
                                std::string(CorpusName(corpus)),
                            options.seed + 0x2545F4914F6CDD1DULL));
  record.a_presented_first = (rng() & 1) == 0;

  const std::string& first = record.a_presented_first ? text(a->second) : text(b->second);
  const std::string& second = record.a_presented_first ? text(b->second) : text(a->second);
  TemplateValues values;
  values["context"] = item.context;
  values["response_a"] = first;
  values["response_b"] = second;
  values["metric_name"] = std::string(info.name);
  values["metric_definition"] = catalog.Get(info.template_id);
  const std::string prompt = catalog.Render("judge", values);

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    ChatRequest request;
    request.messages = {{"user", attempt == 0 ? prompt
                                              : prompt + "\n\nEnd your reply with "
                                                         "exactly one of [A] or [B]."}};
    request.tag.seat = item.seat;
    request.tag.stage = "judge";
    request.tag.phase = std::string(info.code);
    request.tag.attempt = attempt;
    const ChatResponse response = gateway.Complete(request, ModelStage::kJudge);
    if (const auto presented = ParseVerdict(response.text)) {
      const bool first_won = *presented == 'A';
      record.verdict = first_won == record.a_presented_first ? 'A' : 'B';
      record.rationale = response.text;
      return record;
    }
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, std::string>> AllPairs(
    const std::vector<std::string>& methods) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      pairs.emplace_back(methods[i], methods[j]);
    }
  }
  return pairs;
}

JudgeRun RunJudging(const Dataset& dataset,
                    const std::vector<std::pair<std::string, std::string>>& pairs,
                    const std::vector<MetricId>& metrics,
                    const std::vector<Corpus>& corpora, const Gateway& gateway,
                    const PromptCatalog& catalog, const JudgeOptions& options,
                    int parallelism) {
  struct Job {
    const DatasetItem* item;
    const std::pair<std::string, std::string>* pair;
    MetricId metric;
    Corpus corpus;
  };
  std::vector<Job> jobs;
  for (const DatasetItem& item : dataset.items) {
    for (const auto& pair : pairs) {
      for (Corpus corpus : corpora) {
        for (MetricId metric : metrics) {
          if (MetricApplies(metric, corpus, item.role)) {
            jobs.push_back({&item, &pair, metric, corpus});
          }
        }
      }
    }
  }
  std::vector<std::optional<ComparisonRecord>> results(jobs.size());
  ParallelFor(static_cast<int>(jobs.size()), parallelism, [&](int i) {
    const Job& job = jobs[i];
    results[i] = JudgePair(*job.item, job.pair->first, job.pair->second, job.metric,
                           job.corpus, gateway, catalog, options);
  });

  JudgeRun run;
  for (auto& result : results) {
    if (result) run.records.push_back(std::move(*result));
    else ++run.dropped;
  }
  if (run.dropped > 0) {
    spdlog::warn("{} judge comparisons dropped: no parseable verdict", run.dropped);
  }
  return run;
}

std::vector<PreferenceRow> PreferenceTable(const std::vector<ComparisonRecord>& records) {
  using Key = std::tuple<Corpus, MetricId, std::string>;
  std::map<Key, std::pair<int, int>> tally;  // won, participated
  for (const ComparisonRecord& r : records) {
    for (const std::string* method : {&r.method_a, &r.method_b}) {
      auto& [won, participated] = tally[{r.corpus, r.metric, *method}];
      ++participated;
      if (r.Winner() == *method) ++won;
    }
  }
  std::vector<PreferenceRow> rows;
  for (const auto& [key, counts] : tally) {
    PreferenceRow row;
    row.corpus = std::get<0>(key);
    row.metric = std::get<1>(key);
    row.method = std::get<2>(key);
    row.won = counts.first;
    row.participated = counts.second;
    row.percentage = static_cast<double>(row.won) / row.participated;
    row.interval = Wilson(row.won, row.participated);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<HeadToHead> HeadToHeadTable(const std::vector<ComparisonRecord>& records) {
  using Key = std::tuple<Corpus, MetricId, std::string, std::string>;
  std::map<Key, HeadToHead> table;
  for (const ComparisonRecord& r : records) {
    const bool swap = r.method_b < r.method_a;
    const std::string& first = swap ? r.method_b : r.method_a;
    const std::string& second = swap ? r.method_a : r.method_b;
    HeadToHead& h = table[{r.corpus, r.metric, first, second}];
    h.metric = r.metric;
    h.corpus = r.corpus;
    h.method_a = first;
    h.method_b = second;
    (r.Winner() == first ? h.a_wins : h.b_wins)++;
  }
  std::vector<HeadToHead> out;
  for (auto& [key, h] : table) out.push_back(h);
  return out;
}

std::string FormatPreferenceTable(const std::vector<PreferenceRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-26s %-4s %-28s %7s %9s  %s\n", "corpus", "metric",
                "method", "won", "pref", "95% CI");
  out << line;
  for (const PreferenceRow& row : rows) {
    const std::string counts = std::to_string(row.won) + "/" + std::to_string(row.participated);
    std::snprintf(line, sizeof(line), "%-26s %-4s   %-28s %7s %8.1f%%  [%.1f%%, %.1f%%]\n",
                  std::string(CorpusName(row.corpus)).c_str(),
                  std::string(MetricInfo(row.metric).code).c_str(), row.method.c_str(),
                  counts.c_str(), 100.0 * row.percentage, 100.0 * row.interval.low,
                  100.0 * row.interval.high);
    out << line;
  }
  return out.str();
}

std::string PreferenceCsv(const std::vector<PreferenceRow>& rows) {
  std::string out = "corpus,metric,method,won,participated,percentage,ci_low,ci_high\n";
  for (const PreferenceRow& row : rows) {
    out += std::string(CorpusName(row.corpus)) + "," +
           std::string(MetricInfo(row.metric).code) + "," + CsvField(row.method) + "," +
           std::to_string(row.won) + "," + std::to_string(row.participated) + "," +
           Fixed(row.percentage, 6) + "," + Fixed(row.interval.low, 6) + "," +
           Fixed(row.interval.high, 6) + "\n";
  }
  return out;
}

}  // namespace recon
