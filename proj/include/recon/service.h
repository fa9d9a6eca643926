// HTTP service for human-seat play, spectating and live intervention.
//
// Endpoints (JSON bodies unless noted):
//
//   GET  /health
//   POST /games                      {seed?, human_seats?, intervention?, seats?}
//                                    -> 201 {id, seat_tokens: {"2": "..."}}
//   GET  /games                      ids and statuses
//   GET  /games/{id}/state           public state, status, awaiting seats
//   GET  /games/{id}/seats/{n}       knowledge view and legal actions   [seat]
//   POST /games/{id}/actions         {seat, text?, decision?}           [seat]
//                                    -> 200 {accepted: true} or
//                                       422 {accepted: false, error, legal_actions}
//   GET  /games/{id}/traces?mode=    redacted (default) or full         [full: operator]
//   GET  /games/{id}/log?mode=       JSONL, redacted or full            [full: operator]
//   GET  /games/{id}/transcript?mode=
//   GET  /games/{id}/intervention    pending item                       [operator]
//   POST /games/{id}/intervention    {resolution: approve|edit|reject, text?}
//   GET  /games/{id}/events?from=N   server-sent events, see below
//
// [seat] means "Authorization: Bearer <seat token or operator token>";
// [operator] requires the operator token. With no operator token configured
// every operator request is denied.
//
// Push channel: each SSE message has "id: <seq>", "event: <type>" and one
// "data:" line of JSON. Types are the redacted log lines (header, event,
// footer, aborted) and "status" messages carrying the public state after
// every step. ?from=N (or Last-Event-ID) resumes after message N-1. The stream
// ends after the footer.

#pragma once

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "recon/config.h"
#include "recon/match.h"

namespace httplib {
class Server;
}

namespace recon {

class GameService {
 public:
  GameService(RunConfig config, const Gateway& gateway, const PromptCatalog& catalog,
              std::string operator_token);
  ~GameService();
  GameService(const GameService&) = delete;
  GameService& operator=(const GameService&) = delete;

  void Mount(httplib::Server& server);

  // Binds and serves on a background thread; returns the bound port.
  int Start(const std::string& host, int port);
  void Stop();

  // Blocks until game `id` stops running or needs input, or the timeout
  // passes. Returns the status name. Used by tests and the CLI.
  std::string WaitIdle(const std::string& id, std::chrono::milliseconds timeout);

 private:
  struct Session;

  std::shared_ptr<Session> Find(const std::string& id);
  std::string Create(const Json& request, Json& response);
  void RunWorker(const std::shared_ptr<Session>& session);
  void Publish(Session& session);
  bool IsOperator(const std::string& auth_header) const;

  RunConfig config_;
  const Gateway& gateway_;
  const PromptCatalog& catalog_;
  std::string operator_token_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
};

}  // namespace recon
