// recon: command-line entry point.
//
//   recon run     --config run.json [--seed N]... [--log-dir DIR]
//   recon eval    --config run.json --side good --variant recon [--opponent cot]
//                 --games 20 [--seed-start 0] [--csv out.csv]
//   recon judge   --config run.json --logs DIR --methods recon,cot [--metrics LG,CCL]
//                 [--corpus speech] [--csv out.csv] [--records out.jsonl]
//   recon replay  LOG [--full]
//   recon stats   DIR
//   recon serve   --config run.json [--host H] [--port P]

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "recon/config.h"
#include "recon/eval.h"
#include "recon/game_log.h"
#include "recon/match.h"
#include "recon/service.h"

namespace {

using namespace recon;

std::vector<std::string> SplitCsv(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else if (c != ' ') {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

int Run(const std::string& config_path, std::vector<std::uint64_t> seeds,
        const std::string& log_dir) {
  RunConfig config = LoadRunConfig(config_path);
  if (!seeds.empty()) config.seeds = seeds;
  if (!log_dir.empty()) config.log_dir = log_dir;
  if (!config.seats.human_seats.empty()) {
    throw ConfigError({"human_seats: human play needs the service (recon serve)"});
  }
  if (config.intervention != InterventionMode::kOff) {
    throw ConfigError({"intervention: only the service supports intervention"});
  }
  const auto runtime = BuildRuntime(config);
  ComplianceStats compliance;
  int aborted = 0;
  for (std::uint64_t seed : config.seeds) {
    Match match(config.MatchOptionsFor(seed), *runtime->gateway, runtime->catalog,
                &compliance);
    try {
      match.RunToCompletion();
    } catch (const std::exception& e) {
      spdlog::error("seed {}: game aborted: {}", seed, e.what());
      match.Abort(e.what());
      ++aborted;
    }
    const auto path = config.log_dir / ("seed" + std::to_string(seed) + ".jsonl");
    match.log().WriteFile(path);
    if (const Json* footer = match.log().Footer()) {
      std::cout << "seed " << seed << ": " << footer->value("winner", "")
                << " wins (" << footer->value("cause", "") << ") -> " << path.string()
                << "\n";
    }
  }
  const ComplianceCounts total = compliance.Total();
  std::cout << "format compliance: first try " << total.FirstTryRate() << ", overall "
            << total.SuccessRate() << " over " << total.attempts << " decisions\n";
  return aborted == 0 ? 0 : 1;
}

int Eval(const std::string& config_path, const std::string& side,
         const std::string& variant, const std::string& opponent, int games,
         std::uint64_t seed_start, const std::string& csv, const std::string& log_dir,
         const std::string& shadow) {
  const RunConfig config = LoadRunConfig(config_path);
  MatchupSpec spec;
  const auto tested_side = SideFromName(side);
  const auto tested = AgentVariant::FromName(variant);
  if (!tested_side) throw ConfigError({"--side: must be good or evil"});
  if (!tested) throw ConfigError({"--variant: unknown variant '" + variant + "'"});
  spec.tested_side = *tested_side;
  spec.tested_variant = *tested;
  if (!opponent.empty()) {
    spec.opponent_variant = AgentVariant::FromName(opponent);
    if (!spec.opponent_variant) {
      throw ConfigError({"--opponent: unknown variant '" + opponent + "'"});
    }
  }
  spec.n_games = games;
  for (int i = 0; i < games; ++i) spec.seeds.push_back(seed_start + i);

  TournamentOptions options;
  options.game = config.game;
  options.parallelism = config.parallelism;
  options.log_dir = log_dir.empty() ? config.log_dir : std::filesystem::path(log_dir);
  for (const std::string& name : SplitCsv(shadow)) {
    const auto method = AgentVariant::FromName(name);
    if (!method) throw ConfigError({"--shadow: unknown variant '" + name + "'"});
    options.shadow_methods.push_back(*method);
  }
  if (options.shadow_methods.empty()) options.shadow_methods = config.shadow_methods;
  ComplianceStats compliance;
  options.stats = &compliance;

  const auto runtime = BuildRuntime(config);
  const TournamentResult result =
      RunTournament(spec, *runtime->gateway, runtime->catalog, options);
  std::cout << FormatTournament(spec, result);
  if (!csv.empty()) WriteText(csv, TournamentCsv(result));
  return result.aborted == 0 ? 0 : 1;
}

int Judge(const std::string& config_path, const std::string& logs_dir,
          const std::string& methods_text, const std::string& metrics_text,
          const std::string& corpus_text, std::uint64_t seed, const std::string& csv,
          const std::string& records_path) {
  const RunConfig config = LoadRunConfig(config_path);
  const std::vector<std::string> methods = SplitCsv(methods_text);
  if (methods.size() < 2) throw ConfigError({"--methods: name at least two methods"});
  std::vector<MetricId> metrics;
  for (const std::string& code : SplitCsv(metrics_text)) {
    const auto metric = MetricFromCode(code);
    if (!metric) throw ConfigError({"--metrics: unknown metric '" + code + "'"});
    metrics.push_back(*metric);
  }
  if (metrics.empty()) {
    for (const JudgeMetric& m : JudgeMetrics()) metrics.push_back(m.id);
  }
  std::vector<Corpus> corpora;
  for (const std::string& name : SplitCsv(corpus_text)) {
    const auto corpus = CorpusFromName(name);
    if (!corpus) throw ConfigError({"--corpus: unknown corpus '" + name + "'"});
    corpora.push_back(*corpus);
  }

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(logs_dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GameLog> logs;
  for (const auto& file : files) logs.push_back(GameLog::ReadFile(file));

  const Dataset dataset = CollectDataset(logs, methods);
  std::cout << "contexts: " << dataset.items.size() << " (skipped " << dataset.skipped
            << "), responses: " << dataset.ResponseCount() << "\n";
  const auto runtime = BuildRuntime(config);
  const JudgeRun run = RunJudging(dataset, AllPairs(methods), metrics, corpora,
                                  *runtime->gateway, runtime->catalog,
                                  JudgeOptions{seed, 3}, config.parallelism);
  std::cout << "comparisons: " << run.records.size() << " (dropped " << run.dropped
            << ")\n";
  const auto rows = PreferenceTable(run.records);
  std::cout << FormatPreferenceTable(rows);
  if (!csv.empty()) WriteText(csv, PreferenceCsv(rows));
  if (!records_path.empty()) {
    std::string text;
    for (const ComparisonRecord& record : run.records) text += ToJson(record).dump() + "\n";
    WriteText(records_path, text);
  }
  return 0;
}

int ReplayCommand(const std::string& path, bool full) {
  const GameLog log = GameLog::ReadFile(path);
  try {
    Replay(log);
  } catch (const ReplayError& e) {
    std::cerr << "replay failed at event " << e.event_index() << ": " << e.what() << "\n";
    return 2;
  }
  std::cout << RenderTranscript(full ? log : Redact(log), full);
  return 0;
}

int Serve(const std::string& config_path, const std::string& host, int port) {
  RunConfig config = LoadRunConfig(config_path);
  if (!host.empty()) config.service.host = host;
  if (port >= 0) config.service.port = port;
  const char* token = std::getenv(config.service.operator_token_env.c_str());
  if (token == nullptr || *token == '\0') {
    spdlog::warn("{} is not set; operator endpoints will deny every request",
                 config.service.operator_token_env);
  }
  // Block the stop signals before any thread starts so they all inherit the
  // mask and sigwait below is the only receiver.
  sigset_t mask;
  sigemptyset(&mask);
  sigaddset(&mask, SIGINT);
  sigaddset(&mask, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &mask, nullptr);

  const auto runtime = BuildRuntime(config);
  GameService service(config, *runtime->gateway, runtime->catalog,
                      token == nullptr ? "" : token);
  const int bound = service.Start(config.service.host, config.service.port);
  std::cout << "serving on http://" << config.service.host << ":" << bound << "\n"
            << std::flush;
  int signal = 0;
  sigwait(&mask, &signal);
  service.Stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Avalon self-play with recursive-contemplation agents"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string log_dir;
  auto* run = app.add_subcommand("run", "Play games as configured and write logs");
  run->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
  run->add_option("-s,--seed", seeds, "Seed(s); overrides the config");
  run->add_option("--log-dir", log_dir, "Log directory; overrides the config");

  std::string side = "good", variant = "recon", opponent, csv, shadow;
  int games = 1;
  std::uint64_t seed_start = 0;
  auto* eval = app.add_subcommand("eval", "Tournament of one variant against another");
  eval->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
  eval->add_option("--side", side, "Side of the tested variant: good or evil");
  eval->add_option("--variant", variant, "Tested variant");
  eval->add_option("--opponent", opponent, "Opponent variant (default by side)");
  eval->add_option("-n,--games", games, "Number of games")->check(CLI::PositiveNumber);
  eval->add_option("--seed-start", seed_start, "First seed");
  eval->add_option("--csv", csv, "Write per-game results as CSV");
  eval->add_option("--log-dir", log_dir, "Log directory; overrides the config");
  eval->add_option("--shadow", shadow, "Comma-separated methods to record for judging");

  std::string logs, methods = "recon,cot", metrics, corpus = "speech,speech_and_contemplation";
  std::string records;
  std::uint64_t judge_seed = 0;
  auto* judge = app.add_subcommand("judge", "Pairwise judging of logged responses");
  judge->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
  judge->add_option("--logs", logs, "Directory of game logs")->required();
  judge->add_option("--methods", methods, "Comma-separated methods to compare");
  judge->add_option("--metrics", metrics, "Comma-separated metric codes (default all)");
  judge->add_option("--corpus", corpus, "speech and/or speech_and_contemplation");
  judge->add_option("--seed", judge_seed, "Seed for presentation order");
  judge->add_option("--csv", csv, "Write the preference table as CSV");
  judge->add_option("--records", records, "Write comparison records as JSONL");

  std::string log_path;
  bool full = false;
  auto* replay = app.add_subcommand("replay", "Verify a log and print its transcript");
  replay->add_option("log", log_path, "Game log")->required();
  replay->add_flag("--full", full, "Include roles and private thoughts");

  std::string stats_dir;
  auto* stats = app.add_subcommand("stats", "Win rates and compliance over a log directory");
  stats->add_option("dir", stats_dir, "Log directory")->required();

  std::string host;
  int port = -1;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
  serve->add_option("--host", host, "Bind address; overrides the config");
  serve->add_option("--port", port, "Port; overrides the config (0 picks one)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*run) return Run(config_path, seeds, log_dir);
    if (*eval) {
      return Eval(config_path, side, variant, opponent, games, seed_start, csv, log_dir,
                  shadow);
    }
    if (*judge) {
      return Judge(config_path, logs, methods, metrics, corpus, judge_seed, csv, records);
    }
    if (*replay) return ReplayCommand(log_path, full);
    if (*stats) {
      std::cout << FormatStats(CollectStats(stats_dir));
      return 0;
    }
    if (*serve) return Serve(config_path, host, port);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
