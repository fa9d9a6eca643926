// LLM-backed Avalon agent.
//
// One Act() runs the enabled contemplation stages in a fixed order:
//
//   first-order transition  updated role assumption G' (replaces G)
//   think                   initial thought T
//   speak                   initial speech S            (always runs)
//   second-order transition perception analysis O of S
//   refine                  refined thought T' and speech S'
//
// The public output is S' when refinement ran, otherwise S. The CoT baseline
// replaces all of this with a single think-then-answer call.
//
// An agent only ever sees its own AgentMemory and a PublicView; it has no
// path to other seats' roles or traces.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recon/decision_parser.h"
#include "recon/game_core.h"
#include "recon/gateway.h"
#include "recon/json_io.h"
#include "recon/prompt_catalog.h"

namespace recon {

enum class SpeechStyle { kDefault, kHumanLikeSpeech, kHumanLikeThoughtsAndSpeech };
enum class Baseline { kReCon, kCoT };

struct AgentVariant {
  bool formulation_enabled = true;
  bool refinement_enabled = true;
  bool first_order_enabled = true;
  bool second_order_enabled = true;
  SpeechStyle style = SpeechStyle::kDefault;
  Baseline baseline = Baseline::kReCon;
  // Also run the first-order transition before votes, quest cards and the
  // assassination, not only before speeches and proposals.
  bool refresh_assumption_before_decisions = true;

  static AgentVariant ReCon();
  static AgentVariant CoT();
  static AgentVariant WithoutFormulation();
  static AgentVariant WithoutRefinement();
  static AgentVariant WithoutFirstOrder();
  static AgentVariant WithoutSecondOrder();

  // "recon", "cot", "recon_wo_refinement", ..., optionally suffixed with
  // "+human_speech" or "+human_thoughts_speech".
  std::string Name() const;
  static std::optional<AgentVariant> FromName(std::string_view name);

  std::vector<std::string> Validate() const;
  // Model calls per act for the given action, assuming compliant replies.
  int CallsPerAct(ActionKind kind) const;

  bool operator==(const AgentVariant&) const = default;
};

// ReCon, the four single-component ablations and CoT.
std::vector<AgentVariant> AblationVariants();

struct TraceField {
  std::string text;
  int stamp = 0;  // logical clock, monotone within one agent
};

struct CallRecord {
  std::string stage;
  std::string model;
  int attempts = 0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  bool long_context = false;
  double latency_ms = 0.0;
};

struct ContemplationTrace {
  Seat seat = 0;
  int turn = 0;
  ActionKind action = ActionKind::kNone;
  std::optional<TraceField> updated_assumption;   // G'
  std::optional<TraceField> initial_thought;      // T
  std::optional<TraceField> initial_speech;       // S
  std::optional<TraceField> perception_analysis;  // O
  std::optional<TraceField> refined_thought;      // T'
  std::optional<TraceField> refined_speech;       // S'
  std::optional<TraceField> cot_response;         // CoT baseline only
  std::vector<CallRecord> calls;
  std::optional<ParseOutcome> parse_outcome;
  bool forced = false;  // decision had a single legal option; no model call
  std::vector<std::string> warnings;

  // Every private text in the trace.
  std::vector<std::string> PrivateTexts() const;
  // The private texts that were not committed as `public_text`: G', T, O, T',
  // a superseded S, and the thought part of a CoT reply.
  std::vector<std::string> SecretTexts(std::string_view public_text) const;
};

Json ToJson(const ContemplationTrace& trace);
ContemplationTrace ContemplationTraceFromJson(const Json& j);

struct AgentMemory {
  Seat seat = 0;
  KnowledgeView knowledge;
  std::string role_assumption;  // G, most recent only
  std::vector<ContemplationTrace> private_traces;
  int next_turn = 0;
  int next_stamp = 0;
};

// What every player can see.
struct PublicView {
  GameConfig config;
  Phase phase = Phase::kProposal;
  int quest_index = 1;
  Seat leader = 1;
  int consecutive_rejections = 0;
  std::vector<QuestRecord> quest_records;
  std::optional<SeatSet> pending_proposal;
  std::vector<PublicEvent> history;
};
PublicView MakePublicView(const GameState& state);

enum class PhaseKind { kPropose, kDiscuss, kTeamVote, kQuestVote, kAssassinate };
std::string_view PhaseKindName(PhaseKind kind);
std::optional<PhaseKind> PhaseKindFor(ActionKind kind);

struct TaskPrompt {
  PhaseKind phase_kind = PhaseKind::kDiscuss;
  std::string template_id;
  Side side_guidance = Side::kGood;
  std::string rendered_text;
};

TaskPrompt BuildTaskPrompt(const PromptCatalog& catalog, const PublicView& view,
                           const KnowledgeView& knowledge,
                           const ActionDescriptor& descriptor);

std::string RenderHistory(const std::vector<PublicEvent>& history);
std::string RenderKnowledge(const KnowledgeView& knowledge);
// "You are Player 3. Your role is Merlin" -- the phrase that identifies a
// seat's role in its own prompts.
std::string IdentityPhrase(Seat seat, Role role);

// Splits a "Thought: ... Speech: ..." reply. Labels are case-insensitive and
// may be wrapped in markdown emphasis.
struct TwoPartReply {
  std::string thought;
  std::string speech;
};
std::optional<TwoPartReply> SplitThoughtAndSpeech(std::string_view reply);

// Decision used when a reply cannot be parsed after all re-prompts.
Decision FallbackDecision(const ActionDescriptor& descriptor,
                          const KnowledgeView& knowledge, std::uint64_t seed);

inline constexpr int kExtraFormatAttempts = 2;

struct ActResult {
  ContemplationTrace trace;
  std::string public_text;  // S' or S; for decisions the reply carrying it
  std::optional<Decision> decision;
};

class Agent {
 public:
  Agent(AgentMemory memory, AgentVariant variant, const Gateway& gateway,
        const PromptCatalog& catalog, std::uint64_t seed,
        ComplianceStats* stats = nullptr);

  // Runs the enabled stages for one turn and returns the trace plus the
  // output to commit. The trace is appended to private memory. Gateway
  // errors propagate.
  ActResult Act(const PublicView& view, const ActionDescriptor& descriptor);

  // Individual stages. Each fills its field(s) of `trace`.
  std::string InferRoles(const PublicView& view,
                         const ActionDescriptor& descriptor,
                         ContemplationTrace& trace);
  std::string Think(const PublicView& view, const TaskPrompt& task,
                    const ActionDescriptor& descriptor,
                    ContemplationTrace& trace);
  std::string Speak(const PublicView& view, const TaskPrompt& task,
                    const ActionDescriptor& descriptor,
                    ContemplationTrace& trace, const std::string& reminder = "");
  std::string AssessPerception(const PublicView& view,
                               const ActionDescriptor& descriptor,
                               ContemplationTrace& trace);
  TwoPartReply Refine(const PublicView& view, const TaskPrompt& task,
                      const ActionDescriptor& descriptor,
                      ContemplationTrace& trace,
                      const std::string& reminder = "");

  const AgentMemory& memory() const { return memory_; }
  const AgentVariant& variant() const { return variant_; }

 private:
  ChatResponse Call(const PublicView& view, ModelStage model_stage,
                    const std::string& stage,
                    const std::string& user_prompt,
                    const ActionDescriptor& descriptor,
                    ContemplationTrace& trace);
  TraceField Stamp(std::string text);
  std::string SystemPrompt(const PublicView& view) const;
  std::string FormatInstructions(const ActionDescriptor& descriptor) const;
  std::string StyleClause(bool thought) const;
  std::string CurrentAssumption() const;
  ActResult CoTAct(const PublicView& view, const TaskPrompt& task,
                   const ActionDescriptor& descriptor, ContemplationTrace trace);
  void ResolveDecision(const PublicView& view, const TaskPrompt& task,
                       const ActionDescriptor& descriptor, ActResult& result,
                       const std::string& model);

  AgentMemory memory_;
  AgentVariant variant_;
  const Gateway& gateway_;
  const PromptCatalog& catalog_;
  std::uint64_t seed_;
  ComplianceStats* stats_;
  int current_turn_ = 0;
};

}  // namespace recon
