#pragma once

#include <vector>

#include "netdef/agents.hpp"
#include "netdef/neuralnet.hpp"

namespace netdef {

enum class KeepPolicy { CorrectedOnly, KeepBoth };

struct DefenceConfig {
    int limit_estimate = 2;  // LIMIT', the assumed per-step flip budget
    KeepPolicy keep = KeepPolicy::CorrectedOnly;
    // only keep a flip whose score strictly exceeds the unflipped score;
    // softens distortion when no attack is present
    bool strict_improvement = true;
    bool recompute_reward = true;
    bool policy_head = false;  // score by action probability (actor-critic)
};

// Inversion of suspected adversarial flips: searches ALL node bits (the
// defender has no knowledge of the attacker's candidate lists), keeps the
// limit_estimate highest-scoring flips per kind under the defender's own
// model, applies them jointly. Returns the corrected experience, preceded
// by the incoming one under KeepPolicy::KeepBoth.
// node_bits is the length of the node segment of the observation (link
// bits beyond it are never touched).
std::vector<Experience> invert(const Experience& exp, const DefenceConfig& cfg, const Mlp& model,
                               int node_bits, const StepContext* ctx = nullptr);

InterceptorFactory make_defence_interceptor(DefenceConfig cfg);

}  // namespace netdef
