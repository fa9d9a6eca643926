#include "recon/game_log.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace recon {
namespace {

const Json* FindType(const std::vector<Json>& lines, std::string_view type) {
  for (const Json& line : lines) {
    if (line.value("type", "") == type) return &line;
  }
  return nullptr;
}

GameState ApplyLoggedAction(const GameState& state, const PublicEvent& event,
                            const std::optional<std::map<Seat, QuestVote>>& quest_votes,
                            int index) {
  switch (event.kind) {
    case EventKind::kProposal:
      return ApplyProposal(state, event.actor.value_or(0), event.team);
    case EventKind::kSpeech:
      return ApplySpeech(state, event.actor.value_or(0), event.text);
    case EventKind::kTeamVoteReveal:
      return ApplyTeamVotes(state, event.team_votes);
    case EventKind::kQuestReveal:
      if (!quest_votes) {
        throw ReplayError(index, "event " + std::to_string(index) +
                                     ": quest reveal without a quest_votes record");
      }
      return ApplyQuestVotes(state, *quest_votes);
    case EventKind::kAssassinationReveal:
      return ApplyAssassination(state, event.target.value_or(0));
    case EventKind::kPhaseMark:
      break;
  }
  throw ReplayError(index, "event " + std::to_string(index) +
                               ": phase mark does not follow the action that produces it");
}

std::string SideTag(const std::optional<std::array<Role, kNumPlayers>>& seats,
                    Seat seat) {
  if (!seats) return "";
  return SideOf((*seats)[seat - 1]) == Side::kGood ? " [GOOD]" : " [EVIL]";
}

std::string ThoughtOf(const ContemplationTrace& trace) {
  if (trace.refined_thought) return trace.refined_thought->text;
  if (trace.initial_thought) return trace.initial_thought->text;
  if (trace.cot_response) {
    if (const auto parts = SplitThoughtAndSpeech(trace.cot_response->text)) {
      return parts->thought;
    }
  }
  return "";
}

}  // namespace

const Json* GameLog::Header() const { return FindType(lines_, "header"); }
const Json* GameLog::Footer() const { return FindType(lines_, "footer"); }
bool GameLog::Aborted() const { return FindType(lines_, "aborted") != nullptr; }

std::string GameLog::Serialize() const {
  std::string out;
  for (const Json& line : lines_) {
    out += line.dump();
    out += '\n';
  }
  return out;
}

GameLog GameLog::Parse(std::string_view text) {
  GameLog log;
  std::size_t start = 0;
  int line_number = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_number;
    const std::string_view line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        log.Append(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw JsonFormatError("log line " + std::to_string(line_number) + ": " +
                              e.what());
      }
    }
    start = end + 1;
  }
  return log;
}

void GameLog::WriteFile(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << Serialize();
}

GameLog GameLog::ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return Parse(text.str());
}

GameState Replay(const GameLog& log) {
  const Json* header = log.Header();
  if (header == nullptr || !header->contains("seats")) {
    throw ReplayError(-1, "log has no header with a seat assignment");
  }
  if (header->value("version", 0) != kLogVersion) {
    throw ReplayError(-1, "unsupported log version");
  }
  GameState state;
  try {
    state = NewGame(GameConfigFromJson(header->at("config")),
                    SeatsFromJson(header->at("seats")));
  } catch (const std::exception& e) {
    throw ReplayError(-1, std::string("bad header: ") + e.what());
  }

  std::optional<std::map<Seat, QuestVote>> quest_votes;
  std::size_t seen = 0;
  for (const Json& line : log.lines()) {
    const std::string type = line.value("type", "");
    if (type == "quest_votes") {
      quest_votes.emplace();
      for (const auto& [seat, vote] : line.at("votes").items()) {
        const auto parsed = QuestVoteFromName(vote.get<std::string>());
        if (!parsed) throw ReplayError(static_cast<int>(seen), "bad quest vote");
        (*quest_votes)[std::stoi(seat)] = *parsed;
      }
      continue;
    }
    if (type == "footer") {
      const int at = static_cast<int>(seen);
      if (seen != state.history.size()) {
        throw ReplayError(at, "event " + std::to_string(at) +
                                  ": engine produced an event the log lacks");
      }
      if (!state.winner || line.value("winner", "") != SideName(*state.winner) ||
          line.value("cause", "") != FinishCauseName(*state.finish_cause)) {
        throw ReplayError(at, "footer winner or cause differs from the replayed game");
      }
      if (line.value("digest", "") != StateDigest(state)) {
        throw ReplayError(at, "footer digest differs from the replayed state");
      }
      continue;
    }
    if (type != "event") continue;

    const int index = line.value("index", -1);
    if (index != static_cast<int>(seen)) {
      throw ReplayError(static_cast<int>(seen),
                        "event " + std::to_string(seen) + ": index out of sequence");
    }
    ++seen;
    PublicEvent event;
    try {
      event = PublicEventFromJson(line.at("event"));
    } catch (const std::exception& e) {
      throw ReplayError(index, "event " + std::to_string(index) + ": " + e.what());
    }
    if (static_cast<std::size_t>(index) == state.history.size()) {
      try {
        state = ApplyLoggedAction(state, event, quest_votes, index);
      } catch (const RuleViolation& e) {
        throw ReplayError(index, "event " + std::to_string(index) +
                                     ": rejected by the rules engine: " + e.what());
      }
      if (event.kind == EventKind::kQuestReveal) quest_votes.reset();
    }
    if (static_cast<std::size_t>(index) >= state.history.size() ||
        !(state.history[index] == event)) {
      throw ReplayError(index, "event " + std::to_string(index) +
                                   ": state mismatch, the engine produced a different event");
    }
    if (line.contains("digest") && line.at("digest") != StateDigest(state)) {
      throw ReplayError(index, "event " + std::to_string(index) +
                                   ": state mismatch, digest differs");
    }
  }
  if (log.Footer() == nullptr && seen != state.history.size()) {
    throw ReplayError(static_cast<int>(seen),
                      "engine produced an event the log lacks");
  }
  return state;
}

GameLog Redact(const GameLog& log) {
  GameLog out;
  for (const Json& line : log.lines()) {
    if (line.value("private", false)) continue;
    Json copy = line;
    copy.erase("seats");
    copy.erase("digest");
    out.Append(std::move(copy));
  }
  return out;
}

std::string RenderTranscript(const GameLog& log, bool authorized) {
  std::ostringstream out;
  const Json* header = log.Header();
  std::optional<std::array<Role, kNumPlayers>> seats;
  if (header != nullptr) {
    out << "Game seed " << header->value("seed", 0) << "\n";
    if (authorized && header->contains("seats")) {
      seats = SeatsFromJson(header->at("seats"));
      for (Seat s = 1; s <= kNumPlayers; ++s) {
        out << "  " << SeatLabel(s) << SideTag(seats, s) << " "
            << RoleName((*seats)[s - 1]);
        if (header->contains("controllers")) {
          out << " (" << header->at("controllers")[s - 1].get<std::string>() << ")";
        }
        out << "\n";
      }
    }
  }

  int current_quest = 0;
  bool assassination_header = false;
  std::vector<ContemplationTrace> pending_traces;
  for (const Json& line : log.lines()) {
    const std::string type = line.value("type", "");
    if (type == "trace" && authorized) {
      pending_traces.push_back(ContemplationTraceFromJson(line.at("trace")));
      continue;
    }
    if (type == "aborted") {
      out << "\n== Aborted ==\n" << line.value("error", "") << "\n";
      continue;
    }
    if (type == "footer") {
      out << "\n== Result ==\n"
          << (line.value("winner", "") == "good" ? "Good" : "Evil") << " wins ("
          << line.value("cause", "") << ")\n";
      continue;
    }
    if (type != "event") continue;

    const PublicEvent event = PublicEventFromJson(line.at("event"));
    if (event.kind == EventKind::kProposal && event.quest_index != current_quest) {
      current_quest = event.quest_index;
      out << "\n== Quest " << current_quest << " ==\n";
    }
    if (event.kind == EventKind::kAssassinationReveal && !assassination_header) {
      assassination_header = true;
      out << "\n== Assassination ==\n";
    }
    for (const ContemplationTrace& trace : pending_traces) {
      const std::string thought = ThoughtOf(trace);
      if (!thought.empty()) {
        out << "    (" << SeatLabel(trace.seat) << " thinks) " << thought << "\n";
      }
    }
    pending_traces.clear();

    switch (event.kind) {
      case EventKind::kProposal:
        out << SeatLabel(*event.actor) << SideTag(seats, *event.actor)
            << " proposes " << SeatListLabel(event.team) << "\n";
        break;
      case EventKind::kSpeech:
        out << SeatLabel(*event.actor) << SideTag(seats, *event.actor) << ": "
            << event.text << "\n";
        break;
      case EventKind::kTeamVoteReveal: {
        int approvals = 0;
        std::string detail;
        for (const auto& [seat, vote] : event.team_votes) {
          if (vote == TeamVote::kApprove) ++approvals;
          detail += " " + std::to_string(seat) + ":" + TeamVoteName(vote);
        }
        out << "Team vote: " << (event.approved ? "approved" : "rejected") << " ("
            << approvals << "/" << event.team_votes.size() << ")" << detail << "\n";
        break;
      }
      case EventKind::kQuestReveal:
        out << "Quest " << event.quest_index << " "
            << (event.outcome == QuestOutcome::kSuccess ? "succeeds" : "fails")
            << " with " << event.fail_count << " fail card(s)\n";
        break;
      case EventKind::kAssassinationReveal:
        out << "The Assassin names " << SeatLabel(*event.target) << ": "
            << (event.hit ? "Merlin found" : "missed") << "\n";
        break;
      case EventKind::kPhaseMark:
        out << "-- " << event.text << " --\n";
        break;
    }
  }
  return out.str();
}

double LogStats::GoodSuccessRate() const {
  const int finished = good_wins + evil_wins;
  return finished == 0 ? 0.0 : static_cast<double>(good_wins) / finished;
}

void AddToStats(const GameLog& log, LogStats& stats) {
  ++stats.games;
  const Json* footer = log.Footer();
  if (log.Aborted() || footer == nullptr) {
    ++stats.aborted;
    return;
  }
  const std::string winner = footer->value("winner", "");
  (winner == "good" ? stats.good_wins : stats.evil_wins)++;
  ++stats.causes[footer->value("cause", "")];

  const Json* header = log.Header();
  if (header != nullptr && header->contains("seats") && header->contains("controllers")) {
    const auto seats = SeatsFromJson(header->at("seats"));
    std::set<std::string> keys;
    for (Seat s = 1; s <= kNumPlayers; ++s) {
      keys.insert(std::string(SideName(SideOf(seats[s - 1]))) + ":" +
                  header->at("controllers")[s - 1].get<std::string>());
    }
    for (const std::string& key : keys) {
      auto& record = stats.by_side_controller[key];
      ++record.games;
      if (key.rfind(winner + ":", 0) == 0) ++record.wins;
    }
  }

  ComplianceStats compliance;
  for (const Json& line : log.lines()) {
    if (line.value("type", "") != "trace") continue;
    const ContemplationTrace trace = ContemplationTraceFromJson(line.at("trace"));
    if (!trace.parse_outcome || trace.calls.empty()) continue;
    compliance.Record(trace.calls.back().model, trace.action, *trace.parse_outcome);
  }
  for (const auto& [key, counts] : compliance.Snapshot()) {
    stats.compliance[key] += counts;
  }
}

LogStats CollectStats(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  LogStats stats;
  for (const auto& file : files) AddToStats(GameLog::ReadFile(file), stats);
  return stats;
}

std::string FormatStats(const LogStats& stats) {
  std::ostringstream out;
  char buf[64];
  out << "games: " << stats.games << " (aborted " << stats.aborted << ")\n";
  out << "good wins: " << stats.good_wins << ", evil wins: " << stats.evil_wins << "\n";
  std::snprintf(buf, sizeof(buf), "%.4f", stats.GoodSuccessRate());
  out << "good success rate: " << buf << "\n";
  for (const auto& [cause, count] : stats.causes) {
    out << "  " << cause << ": " << count << "\n";
  }
  if (!stats.by_side_controller.empty()) out << "by side and controller:\n";
  for (const auto& [key, record] : stats.by_side_controller) {
    std::snprintf(buf, sizeof(buf), "%.4f",
                  record.games == 0 ? 0.0 : static_cast<double>(record.wins) / record.games);
    out << "  " << key << ": " << record.wins << "/" << record.games << " = " << buf
        << "\n";
  }
  if (!stats.compliance.empty()) out << "format compliance (first try / overall):\n";
  for (const auto& [key, counts] : stats.compliance) {
    std::snprintf(buf, sizeof(buf), "%.4f / %.4f", counts.FirstTryRate(),
                  counts.SuccessRate());
    out << "  " << key.first << " " << ActionKindName(key.second) << ": " << buf
        << " over " << counts.attempts << "\n";
  }
  return out.str();
}

}  // namespace recon
