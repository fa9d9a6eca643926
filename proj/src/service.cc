#include "recon/service.h"

#include <random>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace recon {

struct GameService::Session {
  std::string id;

  std::mutex match_mu;  // guards match and published_lines
  std::unique_ptr<Match> match;
  std::size_t published_lines = 0;
  std::map<Seat, std::string> seat_tokens;

  std::mutex feed_mu;  // guards everything below
  std::condition_variable feed_cv;
  struct Message {
    std::string type;
    std::string data;
  };
  std::vector<Message> feed;
  Match::Status status = Match::Status::kRunning;
  std::string last_status_json;
  bool done = false;
  bool stop = false;
  bool kicked = false;

  std::thread worker;
};

namespace {

void Reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string RandomToken() {
  std::random_device device;
  std::uniform_int_distribution<int> hex(0, 15);
  std::string token;
  for (int i = 0; i < 32; ++i) token += "0123456789abcdef"[hex(device)];
  return token;
}

std::optional<Json> ParseBody(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return Json::object();
  try {
    Json body = Json::parse(req.body);
    if (body.is_object()) return body;
  } catch (const Json::parse_error&) {
  }
  Reply(res, 400, {{"error", "body must be a JSON object"}});
  return std::nullopt;
}

Json RedactedTraces(const GameLog& log) {
  Json out = Json::array();
  for (const Json& line : log.lines()) {
    if (line.value("type", "") != "trace") continue;
    Json entry;
    entry["seat"] = line.at("seat");
    entry["history_index"] = line.at("history_index");
    entry["action"] = line.at("trace").at("action");
    entry["committed"] = line.value("committed", "");
    if (line.contains("intervention")) {
      entry["resolution"] = line.at("intervention").at("resolution");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

Json FullTraces(const GameLog& log) {
  Json out = Json::array();
  for (const Json& line : log.lines()) {
    if (line.value("type", "") == "trace") out.push_back(line);
  }
  return out;
}

}  // namespace

GameService::GameService(RunConfig config, const Gateway& gateway,
                         const PromptCatalog& catalog, std::string operator_token)
    : config_(std::move(config)),
      gateway_(gateway),
      catalog_(catalog),
      operator_token_(std::move(operator_token)) {}

GameService::~GameService() { Stop(); }

bool GameService::IsOperator(const std::string& auth_header) const {
  return !operator_token_.empty() && auth_header == "Bearer " + operator_token_;
}

std::shared_ptr<GameService::Session> GameService::Find(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void GameService::Publish(Session& session) {
  const GameLog& log = session.match->log();
  std::vector<Session::Message> messages;
  for (; session.published_lines < log.lines().size(); ++session.published_lines) {
    const Json& line = log.lines()[session.published_lines];
    if (line.value("private", false)) continue;
    Json copy = line;
    copy.erase("seats");
    copy.erase("digest");
    messages.push_back({copy.value("type", "line"), copy.dump()});
  }
  const Match::Status status = session.match->status();
  Json status_json;
  status_json["status"] = MatchStatusName(status);
  status_json["awaiting"] = session.match->AwaitingSeats();
  const auto& pending = session.match->pending_intervention();
  status_json["pending_intervention"] =
      pending ? Json{{"seat", pending->seat}, {"action", ActionKindName(pending->action)}}
              : Json(nullptr);
  status_json["state"] = PublicStateJson(session.match->state());
  const bool finished = status == Match::Status::kFinished ||
                        (log.Aborted());

  std::lock_guard lock(session.feed_mu);
  for (auto& message : messages) session.feed.push_back(std::move(message));
  const std::string status_text = status_json.dump();
  if (status_text != session.last_status_json) {
    session.feed.push_back({"status", status_text});
    session.last_status_json = status_text;
  }
  session.status = status;
  session.done = finished;
  session.feed_cv.notify_all();
}

void GameService::RunWorker(const std::shared_ptr<Session>& session) {
  while (true) {
    {
      std::unique_lock lock(session->feed_mu);
      session->feed_cv.wait(lock, [&] {
        return session->stop || session->kicked ||
               session->status == Match::Status::kRunning;
      });
      if (session->stop || session->done) return;
      session->kicked = false;
    }
    std::lock_guard match_lock(session->match_mu);
    try {
      session->match->Advance();
    } catch (const std::exception& e) {
      spdlog::warn("game {} aborted: {}", session->id, e.what());
      session->match->Abort(e.what());
    }
    Publish(*session);
  }
}

std::string GameService::Create(const Json& request, Json& response) {
  std::uint64_t seed = config_.seeds.empty() ? 0 : config_.seeds.front();
  if (request.contains("seed")) {
    if (!request.at("seed").is_number_unsigned()) {
      throw ConfigError({"seed: must be a non-negative integer"});
    }
    seed = request.at("seed").get<std::uint64_t>();
  }
  MatchOptions options = config_.MatchOptionsFor(seed);
  std::vector<std::string> errors;
  if (request.contains("intervention")) {
    const auto mode = InterventionModeFromName(request.value("intervention", ""));
    if (mode) options.intervention = *mode;
    else errors.push_back("intervention: unknown mode");
  }
  if (request.contains("seats")) {
    const Json& seats = request.at("seats");
    auto controller = [&](const Json& v, const std::string& path) {
      auto parsed = v.is_string() ? ParseController(v.get<std::string>()) : std::nullopt;
      if (!parsed) errors.push_back(path + ": unknown controller");
      return parsed.value_or(SeatController{});
    };
    if (seats.is_array() && seats.size() == kNumPlayers) {
      std::array<SeatController, kNumPlayers> by_seat;
      for (int i = 0; i < kNumPlayers; ++i) {
        by_seat[i] = controller(seats[i], "seats[" + std::to_string(i) + "]");
      }
      options.seats.by_seat = by_seat;
    } else if (seats.is_object()) {
      if (seats.contains("good")) options.seats.good = controller(seats["good"], "seats.good");
      if (seats.contains("evil")) options.seats.evil = controller(seats["evil"], "seats.evil");
    } else {
      errors.push_back("seats: expected 6 controllers or {good, evil}");
    }
  }
  if (request.contains("human_seats")) {
    options.seats.human_seats.clear();
    const Json& humans = request.at("human_seats");
    for (std::size_t i = 0; humans.is_array() && i < humans.size(); ++i) {
      if (!humans[i].is_number_integer() || humans[i].get<int>() < 1 ||
          humans[i].get<int>() > kNumPlayers) {
        errors.push_back("human_seats[" + std::to_string(i) + "]: seat must be 1..6");
      } else {
        options.seats.human_seats.push_back(humans[i].get<int>());
      }
    }
    if (!humans.is_array()) errors.push_back("human_seats: must be a list");
  }
  if (!errors.empty()) throw ConfigError(errors);

  auto session = std::make_shared<Session>();
  session->match = std::make_unique<Match>(options, gateway_, catalog_);
  Json tokens = Json::object();
  for (Seat seat : options.seats.human_seats) {
    session->seat_tokens[seat] = RandomToken();
    tokens[std::to_string(seat)] = session->seat_tokens[seat];
  }
  {
    std::lock_guard lock(mu_);
    session->id = "g" + std::to_string(next_id_++);
    sessions_[session->id] = session;
  }
  {
    std::lock_guard match_lock(session->match_mu);
    Publish(*session);
  }
  session->worker = std::thread([this, session] { RunWorker(session); });
  response = {{"id", session->id}, {"seat_tokens", tokens}};
  return session->id;
}

std::string GameService::WaitIdle(const std::string& id,
                                  std::chrono::milliseconds timeout) {
  auto session = Find(id);
  if (!session) return "unknown";
  std::unique_lock lock(session->feed_mu);
  session->feed_cv.wait_for(lock, timeout, [&] {
    return session->done || (session->status != Match::Status::kRunning && !session->kicked);
  });
  if (session->done && session->status != Match::Status::kFinished) return "aborted";
  return std::string(MatchStatusName(session->status));
}

void GameService::Mount(httplib::Server& server) {
  using httplib::Request;
  using httplib::Response;

  auto with_session = [this](auto handler) {
    return [this, handler](const Request& req, Response& res) {
      auto session = Find(req.matches[1]);
      if (!session) {
        Reply(res, 404, {{"error", "no such game"}});
        return;
      }
      handler(*session, req, res);
    };
  };
  auto kick = [](Session& session) {
    std::lock_guard lock(session.feed_mu);
    session.kicked = true;
    session.feed_cv.notify_all();
  };

  server.Get("/health", [](const Request&, Response& res) {
    Reply(res, 200, {{"ok", true}});
  });

  server.Post("/games", [this](const Request& req, Response& res) {
    const auto body = ParseBody(req, res);
    if (!body) return;
    try {
      Json response;
      Create(*body, response);
      Reply(res, 201, response);
    } catch (const ConfigError& e) {
      Reply(res, 400, {{"error", "invalid game request"}, {"details", e.errors()}});
    } catch (const std::exception& e) {
      Reply(res, 400, {{"error", e.what()}});
    }
  });

  server.Get("/games", [this](const Request&, Response& res) {
    Json out = Json::array();
    std::lock_guard lock(mu_);
    for (const auto& [id, session] : sessions_) {
      std::lock_guard feed_lock(session->feed_mu);
      out.push_back({{"id", id}, {"status", MatchStatusName(session->status)}});
    }
    Reply(res, 200, out);
  });

  server.Get(R"(/games/([^/]+)/state)",
             with_session([](Session& s, const Request&, Response& res) {
               std::lock_guard lock(s.feed_mu);
               Json out = Json::parse(s.last_status_json);
               out["id"] = s.id;
               out["messages"] = s.feed.size();
               Reply(res, 200, out);
             }));

  server.Get(R"(/games/([^/]+)/seats/(\d+))",
             with_session([this](Session& s, const Request& req, Response& res) {
               const Seat seat = std::stoi(req.matches[2]);
               const std::string auth = req.get_header_value("Authorization");
               const auto token = s.seat_tokens.find(seat);
               if (!IsOperator(auth) &&
                   (token == s.seat_tokens.end() || auth != "Bearer " + token->second)) {
                 Reply(res, 403, {{"error", "seat token required"}});
                 return;
               }
               std::lock_guard lock(s.match_mu);
               if (seat < 1 || seat > kNumPlayers) {
                 Reply(res, 404, {{"error", "no such seat"}});
                 return;
               }
               Reply(res, 200,
                     {{"seat", seat},
                      {"knowledge", ToJson(GetKnowledgeView(s.match->state(), seat))},
                      {"legal_actions", ToJson(s.match->LegalActionsFor(seat))}});
             }));

  server.Post(R"(/games/([^/]+)/actions)",
              with_session([this, kick](Session& s, const Request& req, Response& res) {
                const auto body = ParseBody(req, res);
                if (!body) return;
                if (!body->contains("seat") || !(*body)["seat"].is_number_integer()) {
                  Reply(res, 400, {{"error", "seat is required"}});
                  return;
                }
                const Seat seat = (*body)["seat"].get<int>();
                const std::string auth = req.get_header_value("Authorization");
                const auto token = s.seat_tokens.find(seat);
                if (!IsOperator(auth) &&
                    (token == s.seat_tokens.end() || auth != "Bearer " + token->second)) {
                  Reply(res, 403, {{"error", "seat token required"}});
                  return;
                }
                HumanAction action;
                action.text = body->value("text", "");
                {
                  std::lock_guard lock(s.match_mu);
                  try {
                    if (body->contains("decision")) {
                      action.decision = DecisionFromJson(body->at("decision"));
                    }
                    s.match->SubmitHuman(seat, action);
                  } catch (const ActionRejected& e) {
                    Reply(res, 422, {{"accepted", false},
                                     {"error", e.what()},
                                     {"legal_actions", ToJson(e.legal_actions())}});
                    return;
                  } catch (const std::exception& e) {
                    Reply(res, 422, {{"accepted", false},
                                     {"error", e.what()},
                                     {"legal_actions",
                                      ToJson(s.match->LegalActionsFor(seat))}});
                    return;
                  }
                  Publish(s);
                }
                kick(s);
                Reply(res, 200, {{"accepted", true}});
              }));

  server.Get(R"(/games/([^/]+)/traces)",
             with_session([this](Session& s, const Request& req, Response& res) {
               const std::string mode = req.has_param("mode")
                                            ? req.get_param_value("mode")
                                            : "redacted";
               if (mode == "full" && !IsOperator(req.get_header_value("Authorization"))) {
                 Reply(res, 403, {{"error", "operator token required for full traces"}});
                 return;
               }
               std::lock_guard lock(s.match_mu);
               Reply(res, 200,
                     {{"mode", mode},
                      {"traces", mode == "full" ? FullTraces(s.match->log())
                                                : RedactedTraces(s.match->log())}});
             }));

  server.Get(R"(/games/([^/]+)/log)",
             with_session([this](Session& s, const Request& req, Response& res) {
               const bool full = req.get_param_value("mode") == "full";
               if (full && !IsOperator(req.get_header_value("Authorization"))) {
                 Reply(res, 403, {{"error", "operator token required for the full log"}});
                 return;
               }
               std::lock_guard lock(s.match_mu);
               const GameLog log = full ? s.match->log() : Redact(s.match->log());
               res.set_content(log.Serialize(), "application/x-ndjson");
             }));

  server.Get(R"(/games/([^/]+)/transcript)",
             with_session([this](Session& s, const Request& req, Response& res) {
               const bool full = req.get_param_value("mode") == "full";
               if (full && !IsOperator(req.get_header_value("Authorization"))) {
                 Reply(res, 403, {{"error", "operator token required"}});
                 return;
               }
               std::lock_guard lock(s.match_mu);
               res.set_content(full ? RenderTranscript(s.match->log(), true)
                                    : RenderTranscript(Redact(s.match->log()), false),
                               "text/plain");
             }));

  server.Get(R"(/games/([^/]+)/intervention)",
             with_session([this](Session& s, const Request& req, Response& res) {
               if (!IsOperator(req.get_header_value("Authorization"))) {
                 Reply(res, 403, {{"error", "operator token required"}});
                 return;
               }
               std::lock_guard lock(s.match_mu);
               const auto& pending = s.match->pending_intervention();
               if (!pending) {
                 Reply(res, 200, {{"pending", nullptr}});
                 return;
               }
               Reply(res, 200,
                     {{"pending",
                       {{"seat", pending->seat},
                        {"action", ActionKindName(pending->action)},
                        {"proposed_text", pending->proposed_text},
                        {"proposed_decision", pending->proposed_decision
                                                  ? ToJson(*pending->proposed_decision)
                                                  : Json(nullptr)},
                        {"trace", ToJson(pending->trace)}}}});
             }));

  server.Post(R"(/games/([^/]+)/intervention)",
              with_session([this, kick](Session& s, const Request& req, Response& res) {
                if (!IsOperator(req.get_header_value("Authorization"))) {
                  Reply(res, 403, {{"error", "operator token required"}});
                  return;
                }
                const auto body = ParseBody(req, res);
                if (!body) return;
                const auto resolution = ResolutionFromName(body->value("resolution", ""));
                if (!resolution) {
                  Reply(res, 400, {{"error", "resolution must be approve, edit or reject"}});
                  return;
                }
                if (*resolution == Resolution::kEdit && !body->contains("text")) {
                  Reply(res, 400, {{"error", "edit needs text"}});
                  return;
                }
                {
                  std::lock_guard lock(s.match_mu);
                  if (!s.match->pending_intervention()) {
                    Reply(res, 409, {{"error", "nothing is pending"}});
                    return;
                  }
                  try {
                    s.match->ResolveIntervention(*resolution, body->value("text", ""));
                  } catch (const ActionRejected& e) {
                    Reply(res, 422, {{"error", e.what()},
                                     {"legal_actions", ToJson(e.legal_actions())}});
                    return;
                  }
                  Publish(s);
                }
                kick(s);
                Reply(res, 200, {{"resolved", ResolutionName(*resolution)}});
              }));

  server.Get(R"(/games/([^/]+)/events)", [this](const Request& req, Response& res) {
    auto session = Find(req.matches[1]);
    if (!session) {
      Reply(res, 404, {{"error", "no such game"}});
      return;
    }
    std::size_t from = 0;
    if (req.has_param("from")) {
      from = std::stoul(req.get_param_value("from"));
    } else if (req.has_header("Last-Event-ID")) {
      from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [session, from](std::size_t, httplib::DataSink& sink) mutable {
          std::vector<std::pair<std::size_t, Session::Message>> batch;
          bool finished = false;
          {
            std::unique_lock lock(session->feed_mu);
            session->feed_cv.wait_for(lock, std::chrono::milliseconds(250), [&] {
              return session->feed.size() > from || session->done || session->stop;
            });
            for (; from < session->feed.size(); ++from) {
              batch.emplace_back(from, session->feed[from]);
            }
            finished = session->done || session->stop;
          }
          for (const auto& [seq, message] : batch) {
            const std::string frame = "id: " + std::to_string(seq) + "\nevent: " +
                                      message.type + "\ndata: " + message.data + "\n\n";
            if (!sink.write(frame.data(), frame.size())) return false;
          }
          if (finished) sink.done();
          return sink.is_writable();
        });
  });
}

int GameService::Start(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  Mount(*server_);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void GameService::Stop() {
  std::vector<std::shared_ptr<Session>> sessions;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, session] : sessions_) sessions.push_back(session);
  }
  for (auto& session : sessions) {
    std::lock_guard lock(session->feed_mu);
    session->stop = true;
    session->feed_cv.notify_all();
  }
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  for (auto& session : sessions) {
    if (session->worker.joinable()) session->worker.join();
  }
}

}  // namespace recon
