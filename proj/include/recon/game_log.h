// Append-only game log, one JSON object per line.
//
// Line types, distinguished by "type":
//
//   header      version, game config, seat roles, seed, seat controllers
//   event       one public event, its history index, and the digest of the
//               full state right after the action that produced it
//   quest_votes per-seat quest cards for one quest (private)
//   trace       one agent turn's contemplation trace (private, seat-tagged)
//   shadow      an uncommitted response from another method (private)
//   footer      winner, finish cause, final digest
//   aborted     error text when the game could not finish
//
// Private lines carry "private": true and the owning seat(s) so a redacted
// view can drop them without knowing every line type.

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recon/agent.h"
#include "recon/game_core.h"
#include "recon/json_io.h"

namespace recon {

inline constexpr int kLogVersion = 1;

class GameLog {
 public:
  void Append(Json line) { lines_.push_back(std::move(line)); }
  const std::vector<Json>& lines() const { return lines_; }

  const Json* Header() const;
  const Json* Footer() const;
  bool Aborted() const;

  std::string Serialize() const;
  static GameLog Parse(std::string_view text);
  void WriteFile(const std::filesystem::path& path) const;
  static GameLog ReadFile(const std::filesystem::path& path);

 private:
  std::vector<Json> lines_;
};

class ReplayError : public std::runtime_error {
 public:
  ReplayError(int event_index, const std::string& what)
      : std::runtime_error(what), event_index_(event_index) {}
  // History index of the first offending event, or -1 for header/footer.
  int event_index() const { return event_index_; }

 private:
  int event_index_;
};

// Re-executes the event stream through the rules engine, checking each
// event and digest against the engine's own. Returns the final state.
GameState Replay(const GameLog& log);

// Drops private lines, the seat roles and the state digests (the digest of a
// 6-seat state can be brute-forced back to the role assignment).
GameLog Redact(const GameLog& log);

// Proposal / speech / vote / quest sections per quest. Side markers and
// per-turn thoughts appear only when `authorized` and the log has them.
std::string RenderTranscript(const GameLog& log, bool authorized);

struct LogStats {
  int games = 0;
  int aborted = 0;
  int good_wins = 0;
  int evil_wins = 0;
  std::map<std::string, int> causes;
  // Keyed by "good:<controller>" / "evil:<controller>"; a game counts once
  // per distinct controller on that side.
  struct SideRecord {
    int games = 0;
    int wins = 0;
  };
  std::map<std::string, SideRecord> by_side_controller;
  std::map<ComplianceStats::Key, ComplianceCounts> compliance;

  double GoodSuccessRate() const;
};

// Aggregates every *.jsonl under `dir` (sorted by name).
LogStats CollectStats(const std::filesystem::path& dir);
void AddToStats(const GameLog& log, LogStats& stats);
std::string FormatStats(const LogStats& stats);

}  // namespace recon
