#include "recon/scripted_policy.h"

#include <algorithm>
#include <random>

#include "recon/decision_parser.h"
#include "recon/json_io.h"

namespace recon {
namespace {

std::string RandomWords(std::mt19937_64& rng, int words) {
  std::uniform_int_distribution<int> letter(0, 25);
  std::uniform_int_distribution<int> length(3, 9);
  std::string out;
  for (int w = 0; w < words; ++w) {
    if (w > 0) out += ' ';
    const int n = length(rng);
    for (int i = 0; i < n; ++i) out += static_cast<char>('a' + letter(rng));
  }
  return out;
}

std::string LegalToken(const ActionDescriptor& descriptor, const ChatRequest& request,
                       const ScriptedPolicyOptions& options, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  switch (descriptor.kind) {
    case ActionKind::kPropose: {
      SeatSet pool = descriptor.candidates;
      if (pool.empty()) {
        for (Seat s = 1; s <= descriptor.num_players; ++s) pool.push_back(s);
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      pool.resize(std::min<std::size_t>(pool.size(), descriptor.team_size));
      std::sort(pool.begin(), pool.end());
      return RenderProposal(pool);
    }
    case ActionKind::kTeamVote:
      return RenderTeamVote(coin(rng) < options.approve_rate ? TeamVote::kApprove
                                                             : TeamVote::kDisapprove);
    case ActionKind::kQuestVote: {
      const bool may_fail =
          std::find(descriptor.quest_votes.begin(), descriptor.quest_votes.end(),
                    QuestVote::kFail) != descriptor.quest_votes.end();
      return RenderQuestVote(may_fail && coin(rng) < options.evil_fail_rate
                                 ? QuestVote::kFail
                                 : QuestVote::kSuccess);
    }
    case ActionKind::kAssassinate: {
      std::uniform_int_distribution<std::size_t> pick(
          0, descriptor.candidates.size() - 1);
      return RenderAssassination(descriptor.candidates[pick(rng)]);
    }
    default:
      (void)request;
      return "";
  }
}

}  // namespace

std::uint64_t Fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t hash = basis;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

ScriptedProvider::Responder MakeScriptedPolicy(ScriptedPolicyOptions options) {
  return [options](const ChatRequest& request) -> std::string {
    const RequestTag& tag = request.tag;
    std::uint64_t key = Fnv1a(request.Joined(), options.seed * 0x9E3779B97F4A7C15ULL + 1);
    key = Fnv1a(tag.stage + "/" + std::to_string(tag.seat) + "/" +
                    std::to_string(tag.turn) + "/" + std::to_string(tag.attempt),
                key);
    std::mt19937_64 rng(key);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    const bool carries_output =
        tag.stage == "speak" || tag.stage == "refine" || tag.stage == "cot";
    if (!carries_output) return RandomWords(rng, options.words_per_text);

    std::string speech = RandomWords(rng, options.words_per_text);
    if (!tag.schema.empty()) {
      const ActionDescriptor descriptor = ActionDescriptorFromJson(Json::parse(tag.schema));
      if (descriptor.kind != ActionKind::kSpeak && !descriptor.empty() &&
          coin(rng) >= options.noncompliance_rate) {
        speech += " " + LegalToken(descriptor, request, options, rng);
      }
    }
    if (tag.stage == "speak") return speech;
    return "Thought: " + RandomWords(rng, options.words_per_text) +
           "\nSpeech: " + speech;
  };
}

ScriptedProvider::Responder MakeScriptedJudge(ScriptedVerdict verdict,
                                              std::uint64_t seed) {
  return [verdict, seed](const ChatRequest& request) -> std::string {
    switch (verdict) {
      case ScriptedVerdict::kAlwaysA:
        return "The first response is better. [A]";
      case ScriptedVerdict::kAlwaysB:
        return "The second response is better. [B]";
      case ScriptedVerdict::kUnparseable:
        return "Both are equally fine.";
      case ScriptedVerdict::kRandom:
        break;
    }
    const std::uint64_t h = Fnv1a(request.Joined(), seed + 1469598103934665603ULL);
    return (h >> 17) % 2 == 0 ? "Verdict: [A]" : "Verdict: [B]";
  };
}

}  // namespace recon
