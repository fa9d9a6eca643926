#include "recon/agent.h"

#include <algorithm>
#include <cctype>
#include <random>

#include <spdlog/spdlog.h>

namespace recon {
namespace {

constexpr std::string_view kNoAssumption = "(no guess yet)";
constexpr std::string_view kNoThought = "(none)";
constexpr std::string_view kNoPerception = "(not assessed)";

std::string JoinInts(const std::array<int, kNumQuests>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(values[i]);
  }
  return out;
}

std::string RoleHintId(Role role) {
  switch (role) {
    case Role::kMerlin: return "role_merlin";
    case Role::kPercival: return "role_percival";
    case Role::kMorgana: return "role_morgana";
    case Role::kAssassin: return "role_assassin";
    case Role::kServant: return "role_servant";
  }
  return "role_servant";
}

std::string FieldOr(const std::optional<TraceField>& field,
                    std::string_view fallback) {
  return field ? field->text : std::string(fallback);
}

Json FieldJson(const TraceField& field) {
  return {{"text", field.text}, {"stamp", field.stamp}};
}

std::optional<TraceField> FieldFromJson(const Json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return TraceField{j.at(key).at("text").get<std::string>(),
                    j.at(key).at("stamp").get<int>()};
}

std::string TrimCopy(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  return std::string(text.substr(begin, end - begin));
}

// Returns the label ("thought"/"speech") a line opens, and the offset of the
// text after its colon.
std::optional<std::pair<std::string, std::size_t>> SectionLabel(
    std::string_view line) {
  std::size_t i = 0;
  auto skip_decoration = [&] {
    while (i < line.size() &&
           (line[i] == '*' || line[i] == '#' || line[i] == '_' ||
            std::isspace(static_cast<unsigned char>(line[i])))) {
      ++i;
    }
  };
  skip_decoration();
  for (const char* label : {"thought", "speech"}) {
    const std::size_t len = std::char_traits<char>::length(label);
    if (line.size() - i < len) continue;
    bool match = true;
    for (std::size_t k = 0; k < len; ++k) {
      if (std::tolower(static_cast<unsigned char>(line[i + k])) != label[k]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    std::size_t j = i + len;
    while (j < line.size() && (line[j] == '*' || line[j] == '_' || line[j] == ' ')) {
      ++j;
    }
    if (j < line.size() && line[j] == ':') {
      ++j;
      while (j < line.size() && (line[j] == '*' || line[j] == '_')) ++j;
      return std::make_pair(std::string(label), j);
    }
  }
  return std::nullopt;
}

}  // namespace

AgentVariant AgentVariant::ReCon() { return AgentVariant{}; }

AgentVariant AgentVariant::CoT() {
  AgentVariant v;
  v.formulation_enabled = false;
  v.refinement_enabled = false;
  v.first_order_enabled = false;
  v.second_order_enabled = false;
  v.baseline = Baseline::kCoT;
  return v;
}

AgentVariant AgentVariant::WithoutFormulation() {
  AgentVariant v;
  v.formulation_enabled = false;
  v.first_order_enabled = false;
  return v;
}

AgentVariant AgentVariant::WithoutRefinement() {
  AgentVariant v;
  v.refinement_enabled = false;
  v.second_order_enabled = false;
  return v;
}

AgentVariant AgentVariant::WithoutFirstOrder() {
  AgentVariant v;
  v.first_order_enabled = false;
  return v;
}

AgentVariant AgentVariant::WithoutSecondOrder() {
  AgentVariant v;
  v.second_order_enabled = false;
  return v;
}

std::vector<AgentVariant> AblationVariants() {
  return {AgentVariant::ReCon(),
          AgentVariant::WithoutFirstOrder(),
          AgentVariant::WithoutSecondOrder(),
          AgentVariant::WithoutFormulation(),
          AgentVariant::WithoutRefinement(),
          AgentVariant::CoT()};
}

std::string AgentVariant::Name() const {
  std::string name;
  if (baseline == Baseline::kCoT) {
    name = "cot";
  } else if (!formulation_enabled) {
    name = "recon_wo_formulation";
  } else if (!refinement_enabled) {
    name = "recon_wo_refinement";
  } else if (!first_order_enabled) {
    name = "recon_wo_first_order";
  } else if (!second_order_enabled) {
    name = "recon_wo_second_order";
  } else {
    name = "recon";
  }
  if (style == SpeechStyle::kHumanLikeSpeech) name += "+human_speech";
  if (style == SpeechStyle::kHumanLikeThoughtsAndSpeech) {
    name += "+human_thoughts_speech";
  }
  return name;
}

std::optional<AgentVariant> AgentVariant::FromName(std::string_view name) {
  SpeechStyle style = SpeechStyle::kDefault;
  std::string_view base = name;
  if (const auto plus = name.find('+'); plus != std::string_view::npos) {
    base = name.substr(0, plus);
    const std::string_view suffix = name.substr(plus + 1);
    if (suffix == "human_speech") {
      style = SpeechStyle::kHumanLikeSpeech;
    } else if (suffix == "human_thoughts_speech") {
      style = SpeechStyle::kHumanLikeThoughtsAndSpeech;
    } else {
      return std::nullopt;
    }
  }
  std::optional<AgentVariant> variant;
  if (base == "recon") variant = ReCon();
  if (base == "cot") variant = CoT();
  if (base == "recon_wo_formulation") variant = WithoutFormulation();
  if (base == "recon_wo_refinement") variant = WithoutRefinement();
  if (base == "recon_wo_first_order") variant = WithoutFirstOrder();
  if (base == "recon_wo_second_order") variant = WithoutSecondOrder();
  if (variant) variant->style = style;
  return variant;
}

std::vector<std::string> AgentVariant::Validate() const {
  std::vector<std::string> errors;
  if (baseline == Baseline::kCoT &&
      (formulation_enabled || refinement_enabled || first_order_enabled ||
       second_order_enabled)) {
    errors.push_back("CoT baseline requires every contemplation stage off");
  }
  if (first_order_enabled && !formulation_enabled) {
    errors.push_back("first-order transition requires formulation");
  }
  if (second_order_enabled && !refinement_enabled) {
    errors.push_back("second-order transition requires refinement");
  }
  return errors;
}

int AgentVariant::CallsPerAct(ActionKind kind) const {
  if (baseline == Baseline::kCoT) return 1;
  const bool speaking = kind == ActionKind::kSpeak || kind == ActionKind::kPropose;
  int calls = 1;  // speak
  if (first_order_enabled && (speaking || refresh_assumption_before_decisions)) {
    ++calls;
  }
  if (formulation_enabled) ++calls;
  if (second_order_enabled) ++calls;
  if (refinement_enabled) ++calls;
  return calls;
}

std::vector<std::string> ContemplationTrace::PrivateTexts() const {
  std::vector<std::string> texts;
  for (const auto* field :
       {&updated_assumption, &initial_thought, &initial_speech,
        &perception_analysis, &refined_thought, &refined_speech, &cot_response}) {
    if (*field) texts.push_back((*field)->text);
  }
  return texts;
}

std::vector<std::string> ContemplationTrace::SecretTexts(
    std::string_view public_text) const {
  std::vector<std::string> texts;
  for (const auto* field : {&updated_assumption, &initial_thought,
                            &perception_analysis, &refined_thought}) {
    if (*field && !(*field)->text.empty()) texts.push_back((*field)->text);
  }
  if (initial_speech && initial_speech->text != public_text) {
    texts.push_back(initial_speech->text);
  }
  if (cot_response) {
    const auto parts = SplitThoughtAndSpeech(cot_response->text);
    if (parts && !parts->thought.empty()) texts.push_back(parts->thought);
  }
  return texts;
}

Json ToJson(const ContemplationTrace& trace) {
  Json j;
  j["seat"] = trace.seat;
  j["turn"] = trace.turn;
  j["action"] = ActionKindName(trace.action);
  const std::pair<const char*, const std::optional<TraceField>*> fields[] = {
      {"updated_assumption", &trace.updated_assumption},
      {"initial_thought", &trace.initial_thought},
      {"initial_speech", &trace.initial_speech},
      {"perception_analysis", &trace.perception_analysis},
      {"refined_thought", &trace.refined_thought},
      {"refined_speech", &trace.refined_speech},
      {"cot_response", &trace.cot_response},
  };
  for (const auto& [key, field] : fields) {
    if (*field) j[key] = FieldJson(**field);
  }
  Json calls = Json::array();
  for (const CallRecord& call : trace.calls) {
    calls.push_back({{"stage", call.stage},
                     {"model", call.model},
                     {"attempts", call.attempts},
                     {"prompt_tokens", call.prompt_tokens},
                     {"completion_tokens", call.completion_tokens},
                     {"long_context", call.long_context},
                     {"latency_ms", call.latency_ms}});
  }
  j["calls"] = std::move(calls);
  if (trace.parse_outcome) j["parse_outcome"] = ParseOutcomeName(*trace.parse_outcome);
  if (trace.forced) j["forced"] = true;
  if (!trace.warnings.empty()) j["warnings"] = trace.warnings;
  return j;
}

ContemplationTrace ContemplationTraceFromJson(const Json& j) {
  ContemplationTrace trace;
  trace.seat = j.at("seat").get<Seat>();
  trace.turn = j.at("turn").get<int>();
  const std::string action = j.at("action").get<std::string>();
  for (ActionKind kind : {ActionKind::kNone, ActionKind::kPropose, ActionKind::kSpeak,
                          ActionKind::kTeamVote, ActionKind::kQuestVote,
                          ActionKind::kAssassinate}) {
    if (ActionKindName(kind) == action) trace.action = kind;
  }
  trace.updated_assumption = FieldFromJson(j, "updated_assumption");
  trace.initial_thought = FieldFromJson(j, "initial_thought");
  trace.initial_speech = FieldFromJson(j, "initial_speech");
  trace.perception_analysis = FieldFromJson(j, "perception_analysis");
  trace.refined_thought = FieldFromJson(j, "refined_thought");
  trace.refined_speech = FieldFromJson(j, "refined_speech");
  trace.cot_response = FieldFromJson(j, "cot_response");
  for (const Json& call : j.value("calls", Json::array())) {
    CallRecord record;
    record.stage = call.value("stage", "");
    record.model = call.value("model", "");
    record.attempts = call.value("attempts", 0);
    record.prompt_tokens = call.value("prompt_tokens", 0);
    record.completion_tokens = call.value("completion_tokens", 0);
    record.long_context = call.value("long_context", false);
    record.latency_ms = call.value("latency_ms", 0.0);
    trace.calls.push_back(std::move(record));
  }
  if (j.contains("parse_outcome")) {
    trace.parse_outcome =
        ParseOutcomeFromName(j.at("parse_outcome").get<std::string>());
  }
  trace.forced = j.value("forced", false);
  if (j.contains("warnings")) {
    trace.warnings = j.at("warnings").get<std::vector<std::string>>();
  }
  return trace;
}

PublicView MakePublicView(const GameState& state) {
  PublicView view;
  view.config = state.config;
  view.phase = state.phase;
  view.quest_index = state.quest_index;
  view.leader = state.leader;
  view.consecutive_rejections = state.consecutive_rejections;
  view.quest_records = state.quest_records;
  view.pending_proposal = state.pending_proposal;
  view.history = state.history;
  return view;
}

std::string_view PhaseKindName(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::kPropose: return "propose";
    case PhaseKind::kDiscuss: return "discuss";
    case PhaseKind::kTeamVote: return "team_vote";
    case PhaseKind::kQuestVote: return "quest_vote";
    case PhaseKind::kAssassinate: return "assassinate";
  }
  return "?";
}

std::optional<PhaseKind> PhaseKindFor(ActionKind kind) {
  switch (kind) {
    case ActionKind::kPropose: return PhaseKind::kPropose;
    case ActionKind::kSpeak: return PhaseKind::kDiscuss;
    case ActionKind::kTeamVote: return PhaseKind::kTeamVote;
    case ActionKind::kQuestVote: return PhaseKind::kQuestVote;
    case ActionKind::kAssassinate: return PhaseKind::kAssassinate;
    case ActionKind::kNone: break;
  }
  return std::nullopt;
}

TaskPrompt BuildTaskPrompt(const PromptCatalog& catalog, const PublicView& view,
                           const KnowledgeView& knowledge,
                           const ActionDescriptor& descriptor) {
  const std::optional<PhaseKind> kind = PhaseKindFor(descriptor.kind);
  if (!kind) throw std::invalid_argument("no task prompt for an empty action");
  TaskPrompt task;
  task.phase_kind = *kind;
  task.template_id = "task_" + std::string(PhaseKindName(*kind));
  task.side_guidance = SideOf(knowledge.self_role);

  TemplateValues values;
  values["quest_index"] = std::to_string(view.quest_index);
  values["team_size"] = std::to_string(descriptor.team_size);
  values["leader"] = SeatLabel(view.leader);
  values["team"] = view.pending_proposal ? SeatListLabel(*view.pending_proposal)
                                         : std::string("(no team)");
  task.rendered_text = catalog.Render(task.template_id, values);
  const std::string guidance_id =
      task.template_id + "." + std::string(SideName(task.side_guidance));
  if (catalog.Has(guidance_id)) {
    task.rendered_text += "\n" + catalog.Render(guidance_id, values);
  }
  return task;
}

std::string RenderHistory(const std::vector<PublicEvent>& history) {
  if (history.empty()) return "(nothing has happened yet)";
  std::string out;
  for (const PublicEvent& event : history) {
    switch (event.kind) {
      case EventKind::kProposal:
        out += "Quest " + std::to_string(event.quest_index) + ": " +
               SeatLabel(*event.actor) + " (leader) proposed the team " +
               SeatListLabel(event.team) + ".";
        break;
      case EventKind::kSpeech:
        out += SeatLabel(*event.actor) + " said: " + event.text;
        break;
      case EventKind::kTeamVoteReveal: {
        int approvals = 0;
        out += "Team vote on " + SeatListLabel(event.team) + ":";
        for (const auto& [seat, vote] : event.team_votes) {
          out += " " + SeatLabel(seat) + " " + TeamVoteName(vote) + ";";
          if (vote == TeamVote::kApprove) ++approvals;
        }
        out += " the team was " +
               std::string(event.approved ? "approved" : "rejected") + " (" +
               std::to_string(approvals) + " of " +
               std::to_string(event.team_votes.size()) + " approved).";
        break;
      }
      case EventKind::kQuestReveal:
        out += "Quest " + std::to_string(event.quest_index) + " with " +
               SeatListLabel(event.team) + ": " +
               std::to_string(event.fail_count) + " fail card(s), the quest " +
               (event.outcome == QuestOutcome::kSuccess ? "succeeded." : "failed.");
        break;
      case EventKind::kAssassinationReveal:
        out += "The Assassin targeted " + SeatLabel(*event.target) + ": " +
               (event.hit ? "that player was Merlin." : "that player was not Merlin.");
        break;
      case EventKind::kPhaseMark:
        out += "-- " + event.text + " --";
        break;
    }
    out += "\n";
  }
  out.pop_back();
  return out;
}

std::string IdentityPhrase(Seat seat, Role role) {
  return "You are " + SeatLabel(seat) + ". Your role is " +
         std::string(RoleName(role));
}

std::string RenderKnowledge(const KnowledgeView& knowledge) {
  std::string out = IdentityPhrase(knowledge.self_seat, knowledge.self_role) +
                    " (" + std::string(SideName(SideOf(knowledge.self_role))) +
                    " side).";
  switch (knowledge.self_role) {
    case Role::kMerlin:
      out += "\nYou can see that " + SeatListLabel(knowledge.known_evil) +
             " are on the evil side (Morgana and the Assassin, you do not know "
             "which is which).";
      break;
    case Role::kPercival:
      out += "\nOf " + SeatLabel(knowledge.merlin_morgana_pair->first) +
             " and " + SeatLabel(knowledge.merlin_morgana_pair->second) +
             ", one is Merlin and the other is Morgana; you do not know which "
             "is which.";
      break;
    case Role::kMorgana:
      out += "\nYour evil teammate, the Assassin, sits at " +
             SeatListLabel(knowledge.known_evil) + ".";
      break;
    case Role::kAssassin:
      out += "\nYour evil teammate, Morgana, sits at " +
             SeatListLabel(knowledge.known_evil) + ".";
      break;
    case Role::kServant:
      out += "\nYou have no secret information about the other players.";
      break;
  }
  return out;
}

std::optional<TwoPartReply> SplitThoughtAndSpeech(std::string_view reply) {
  std::optional<std::string> thought;
  std::optional<std::string> speech;
  std::string* current = nullptr;
  std::size_t start = 0;
  while (start <= reply.size()) {
    std::size_t end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    const std::string_view line = reply.substr(start, end - start);
    if (const auto label = SectionLabel(line)) {
      std::optional<std::string>& slot =
          label->first == "thought" ? thought : speech;
      slot = std::string(line.substr(label->second));
      current = &*slot;
    } else if (current) {
      *current += "\n";
      *current += line;
    }
    start = end + 1;
  }
  if (!thought || !speech) return std::nullopt;
  TwoPartReply out{TrimCopy(*thought), TrimCopy(*speech)};
  if (out.speech.empty()) return std::nullopt;
  return out;
}

Decision FallbackDecision(const ActionDescriptor& descriptor,
                          const KnowledgeView& knowledge, std::uint64_t seed) {
  switch (descriptor.kind) {
    case ActionKind::kTeamVote:
      return TeamVote::kDisapprove;
    case ActionKind::kQuestVote:
      return SideOf(knowledge.self_role) == Side::kEvil &&
                     std::find(descriptor.quest_votes.begin(),
                               descriptor.quest_votes.end(),
                               QuestVote::kFail) != descriptor.quest_votes.end()
                 ? QuestVote::kFail
                 : QuestVote::kSuccess;
    case ActionKind::kPropose: {
      SeatSet team;
      Seat seat = knowledge.self_seat;
      for (int i = 0; i < descriptor.team_size; ++i) {
        team.push_back(seat);
        seat = seat % descriptor.num_players + 1;
      }
      std::sort(team.begin(), team.end());
      return team;
    }
    case ActionKind::kAssassinate: {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(
          0, descriptor.candidates.size() - 1);
      return descriptor.candidates[pick(rng)];
    }
    default:
      throw std::invalid_argument("no fallback for a non-decision action");
  }
}

Agent::Agent(AgentMemory memory, AgentVariant variant, const Gateway& gateway,
             const PromptCatalog& catalog, std::uint64_t seed,
             ComplianceStats* stats)
    : memory_(std::move(memory)),
      variant_(variant),
      gateway_(gateway),
      catalog_(catalog),
      seed_(seed),
      stats_(stats) {
  const auto errors = variant_.Validate();
  if (!errors.empty()) throw std::invalid_argument("agent variant: " + errors.front());
}

TraceField Agent::Stamp(std::string text) {
  return TraceField{std::move(text), memory_.next_stamp++};
}

std::string Agent::SystemPrompt(const PublicView& view) const {
  TemplateValues rule_values;
  rule_values["team_sizes"] = JoinInts(view.config.team_sizes);
  rule_values["fails_required"] = JoinInts(view.config.fails_required);
  rule_values["rejection_cap"] =
      std::to_string(view.config.max_consecutive_rejections);
  TemplateValues values;
  values["rules"] = catalog_.Render("rules", rule_values);
  values["role_hint"] = catalog_.Get(RoleHintId(memory_.knowledge.self_role));
  return catalog_.Render("system", values);
}

std::string Agent::FormatInstructions(const ActionDescriptor& descriptor) const {
  switch (descriptor.kind) {
    case ActionKind::kPropose:
      return catalog_.Get("format_propose");
    case ActionKind::kTeamVote:
      return catalog_.Get("format_team_vote");
    case ActionKind::kQuestVote: {
      std::string options;
      for (std::size_t i = 0; i < descriptor.quest_votes.size(); ++i) {
        if (i > 0) options += " or ";
        options += RenderQuestVote(descriptor.quest_votes[i]);
      }
      return catalog_.Render("format_quest_vote", {{"quest_options", options}});
    }
    case ActionKind::kAssassinate:
      return catalog_.Get("format_assassinate");
    default:
      return "";
  }
}

std::string Agent::StyleClause(bool thought) const {
  if (thought) {
    return variant_.style == SpeechStyle::kHumanLikeThoughtsAndSpeech
               ? catalog_.Get("style_thought")
               : "";
  }
  return variant_.style == SpeechStyle::kDefault ? "" : catalog_.Get("style_speech");
}

std::string Agent::CurrentAssumption() const {
  return memory_.role_assumption.empty() ? std::string(kNoAssumption)
                                         : memory_.role_assumption;
}

ChatResponse Agent::Call(const PublicView& view, ModelStage model_stage,
                         const std::string& stage,
                         const std::string& user_prompt,
                         const ActionDescriptor& descriptor,
                         ContemplationTrace& trace) {
  ChatRequest request;
  request.messages = {{"system", SystemPrompt(view)}, {"user", user_prompt}};
  request.tag.seat = memory_.seat;
  request.tag.stage = stage;
  request.tag.turn = current_turn_;
  if (const auto kind = PhaseKindFor(descriptor.kind)) {
    request.tag.phase = std::string(PhaseKindName(*kind));
  }
  request.tag.attempt = static_cast<int>(
      std::count_if(trace.calls.begin(), trace.calls.end(),
                    [&](const CallRecord& call) { return call.stage == stage; }));
  request.tag.schema = ToJson(descriptor).dump();
  ChatResponse response = gateway_.Complete(request, model_stage);
  trace.calls.push_back({stage, response.model_name, response.attempt_count,
                         response.prompt_tokens, response.completion_tokens,
                         response.used_long_context, response.latency_ms});
  return response;
}

std::string Agent::InferRoles(const PublicView& view,
                              const ActionDescriptor& descriptor,
                              ContemplationTrace& trace) {
  TemplateValues values;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["assumption"] = CurrentAssumption();
  values["history"] = RenderHistory(view.history);
  ChatResponse response =
      Call(view, ModelStage::kFormulation, "first_order",
           catalog_.Render("first_order", values), descriptor, trace);
  memory_.role_assumption = response.text;
  trace.updated_assumption = Stamp(response.text);
  return response.text;
}

std::string Agent::Think(const PublicView& view, const TaskPrompt& task,
                         const ActionDescriptor& descriptor,
                         ContemplationTrace& trace) {
  TemplateValues values;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["assumption"] = FieldOr(trace.updated_assumption, CurrentAssumption());
  values["history"] = RenderHistory(view.history);
  values["task"] = task.rendered_text;
  values["style_thought"] = StyleClause(true);
  ChatResponse response =
      Call(view, ModelStage::kFormulation, "think",
           catalog_.Render("think", values), descriptor, trace);
  trace.initial_thought = Stamp(response.text);
  return response.text;
}

std::string Agent::Speak(const PublicView& view, const TaskPrompt& task,
                         const ActionDescriptor& descriptor,
                         ContemplationTrace& trace,
                         const std::string& reminder) {
  TemplateValues values;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["assumption"] = FieldOr(trace.updated_assumption, CurrentAssumption());
  values["thought"] = FieldOr(trace.initial_thought, kNoThought);
  values["history"] = RenderHistory(view.history);
  values["task"] = task.rendered_text;
  values["format"] = FormatInstructions(descriptor);
  values["style_speech"] = StyleClause(false);
  ChatResponse response =
      Call(view, ModelStage::kFormulation, "speak",
           catalog_.Render("speak", values) + reminder, descriptor, trace);
  trace.initial_speech = Stamp(response.text);
  return response.text;
}

std::string Agent::AssessPerception(const PublicView& view,
                                    const ActionDescriptor& descriptor,
                                    ContemplationTrace& trace) {
  if (!trace.initial_speech) {
    throw std::logic_error("second-order transition needs an initial speech");
  }
  TemplateValues values;
  values["speech"] = trace.initial_speech->text;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["history"] = RenderHistory(view.history);
  ChatResponse response =
      Call(view, ModelStage::kRefinement, "second_order",
           catalog_.Render("second_order", values), descriptor, trace);
  trace.perception_analysis = Stamp(response.text);
  return response.text;
}

TwoPartReply Agent::Refine(const PublicView& view, const TaskPrompt& task,
                           const ActionDescriptor& descriptor,
                           ContemplationTrace& trace,
                           const std::string& reminder) {
  if (!trace.initial_speech) {
    throw std::logic_error("refinement needs an initial speech");
  }
  TemplateValues values;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["history"] = RenderHistory(view.history);
  values["task"] = task.rendered_text;
  values["thought"] = FieldOr(trace.initial_thought, kNoThought);
  values["speech"] = trace.initial_speech->text;
  values["perception"] = FieldOr(trace.perception_analysis, kNoPerception);
  values["format"] = FormatInstructions(descriptor);
  values["style_thought"] = StyleClause(true);
  values["style_speech"] = StyleClause(false);
  const std::string prompt = catalog_.Render("refine", values) + reminder;

  ChatResponse response = Call(view, ModelStage::kRefinement, "refine", prompt,
                               descriptor, trace);
  std::optional<TwoPartReply> parts = SplitThoughtAndSpeech(response.text);
  if (!parts) {
    response = Call(view, ModelStage::kRefinement, "refine",
                    prompt + catalog_.Get("refine_reminder"), descriptor,
                    trace);
    parts = SplitThoughtAndSpeech(response.text);
  }
  if (!parts) {
    trace.warnings.push_back(
        "refine reply lacked Thought/Speech sections; kept the initial speech");
    spdlog::warn("seat {} turn {}: malformed refine reply, keeping S",
                 memory_.seat, trace.turn);
    parts = TwoPartReply{response.text, trace.initial_speech->text};
  }
  trace.refined_thought = Stamp(parts->thought);
  trace.refined_speech = Stamp(parts->speech);
  return *parts;
}

ActResult Agent::Act(const PublicView& view, const ActionDescriptor& descriptor) {
  if (descriptor.empty()) {
    throw std::invalid_argument("Act called with no legal action");
  }
  ActResult result;
  ContemplationTrace& trace = result.trace;
  trace.seat = memory_.seat;
  trace.turn = memory_.next_turn++;
  trace.action = descriptor.kind;
  current_turn_ = trace.turn;

  if (descriptor.kind == ActionKind::kQuestVote &&
      descriptor.quest_votes.size() == 1) {
    trace.forced = true;
    result.decision = descriptor.quest_votes.front();
    result.public_text = RenderQuestVote(descriptor.quest_votes.front());
    memory_.private_traces.push_back(trace);
    return result;
  }

  const TaskPrompt task =
      BuildTaskPrompt(catalog_, view, memory_.knowledge, descriptor);
  if (variant_.baseline == Baseline::kCoT) {
    result = CoTAct(view, task, descriptor, std::move(trace));
    memory_.private_traces.push_back(result.trace);
    return result;
  }

  const bool decision = descriptor.kind != ActionKind::kSpeak;
  const bool speaking_turn = !decision || descriptor.kind == ActionKind::kPropose;
  if (variant_.first_order_enabled &&
      (speaking_turn || variant_.refresh_assumption_before_decisions)) {
    InferRoles(view, descriptor, trace);
  }
  if (variant_.formulation_enabled) Think(view, task, descriptor, trace);
  Speak(view, task, descriptor, trace);
  if (variant_.second_order_enabled) AssessPerception(view, descriptor, trace);
  if (variant_.refinement_enabled) Refine(view, task, descriptor, trace);

  result.public_text =
      trace.refined_speech ? trace.refined_speech->text : trace.initial_speech->text;
  if (decision) {
    ResolveDecision(view, task, descriptor, result, trace.calls.back().model);
  }
  memory_.private_traces.push_back(result.trace);
  return result;
}

ActResult Agent::CoTAct(const PublicView& view, const TaskPrompt& task,
                        const ActionDescriptor& descriptor,
                        ContemplationTrace trace) {
  TemplateValues values;
  values["knowledge"] = RenderKnowledge(memory_.knowledge);
  values["history"] = RenderHistory(view.history);
  values["task"] = task.rendered_text;
  values["format"] = FormatInstructions(descriptor);
  values["style_speech"] = StyleClause(false);
  ChatResponse response =
      Call(view, ModelStage::kBaseline, "cot", catalog_.Render("cot", values),
           descriptor, trace);
  trace.cot_response = Stamp(response.text);

  ActResult result;
  const std::optional<TwoPartReply> parts = SplitThoughtAndSpeech(response.text);
  result.public_text = parts ? parts->speech : response.text;
  result.trace = std::move(trace);
  if (descriptor.kind != ActionKind::kSpeak) {
    ResolveDecision(view, task, descriptor, result, response.model_name);
  }
  return result;
}

void Agent::ResolveDecision(const PublicView& view, const TaskPrompt& task,
                            const ActionDescriptor& descriptor,
                            ActResult& result, const std::string& model) {
  ContemplationTrace& trace = result.trace;
  Parsed<Decision> parsed = ParseDecision(result.public_text, descriptor);
  int retries = 0;
  std::string last_model = model;
  while (!parsed && retries < kExtraFormatAttempts) {
    ++retries;
    const std::string reminder = catalog_.Render(
        "format_reminder", {{"problem", parsed.detail()},
                            {"format", FormatInstructions(descriptor)}});
    if (variant_.baseline == Baseline::kCoT) {
      TemplateValues values;
      values["knowledge"] = RenderKnowledge(memory_.knowledge);
      values["history"] = RenderHistory(view.history);
      values["task"] = task.rendered_text;
      values["format"] = FormatInstructions(descriptor);
      values["style_speech"] = StyleClause(false);
      ChatResponse response =
          Call(view, ModelStage::kBaseline, "cot",
               catalog_.Render("cot", values) + reminder, descriptor, trace);
      trace.cot_response = Stamp(response.text);
      const auto parts = SplitThoughtAndSpeech(response.text);
      result.public_text = parts ? parts->speech : response.text;
    } else if (variant_.refinement_enabled) {
      result.public_text = Refine(view, task, descriptor, trace, reminder).speech;
    } else {
      result.public_text = Speak(view, task, descriptor, trace, reminder);
    }
    last_model = trace.calls.back().model;
    parsed = ParseDecision(result.public_text, descriptor);
  }

  ParseOutcome outcome;
  if (parsed) {
    result.decision = *parsed;
    outcome = retries == 0 ? ParseOutcome::kFirstTry : ParseOutcome::kRetry;
  } else {
    const std::uint64_t seed =
        seed_ ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(trace.turn + 1));
    result.decision = FallbackDecision(descriptor, memory_.knowledge, seed);
    outcome = ParseOutcome::kFallback;
    trace.warnings.push_back("no parseable decision after " +
                             std::to_string(retries + 1) +
                             " attempts; fallback " +
                             DescribeDecision(*result.decision));
    spdlog::warn("seat {} turn {}: unparseable {} reply ({}), using fallback {}",
                 memory_.seat, trace.turn, ActionKindName(descriptor.kind),
                 ParseErrorName(parsed.error()),
                 DescribeDecision(*result.decision));
  }
  trace.parse_outcome = outcome;
  if (stats_) stats_->Record(last_model, descriptor.kind, outcome);
}

}  // namespace recon
