// Offline stand-in for a chat model.
//
// The responder reads the RequestTag an agent attaches to every call and
// answers in the shape that stage expects: free text for private stages,
// "Thought:/Speech:" pairs for refine and CoT, and a legal bracket token
// whenever the tag's schema names a decision. Replies are a pure function of
// the seed and the request, so games driven by it are reproducible.

#pragma once

#include <cstdint>
#include <string>

#include "recon/gateway.h"

namespace recon {

struct ScriptedPolicyOptions {
  std::uint64_t seed = 0;
  // Probability that a decision-carrying reply omits its bracket token.
  double noncompliance_rate = 0.0;
  // Probability that an evil seat plays [fail] when allowed to.
  double evil_fail_rate = 0.7;
  double approve_rate = 0.5;
  int words_per_text = 8;
};

ScriptedProvider::Responder MakeScriptedPolicy(ScriptedPolicyOptions options);

// Judge stand-in: answers "[A]" or "[B]" for every comparison. kRandom draws
// the letter from the seed and the prompt.
enum class ScriptedVerdict { kAlwaysA, kAlwaysB, kRandom, kUnparseable };
ScriptedProvider::Responder MakeScriptedJudge(ScriptedVerdict verdict,
                                              std::uint64_t seed = 0);

// 64-bit FNV-1a; used to derive per-request randomness.
std::uint64_t Fnv1a(std::string_view text, std::uint64_t basis = 1469598103934665603ULL);

}  // namespace recon
