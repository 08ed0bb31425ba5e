#pragma once

#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "netdef/agents.hpp"
#include "netdef/neuralnet.hpp"
#include "netdef/topology.hpp"

namespace netdef {

// How a (surrogate) model scores an observation for flip selection.
// For Q models the score of action a' at x is Q(x)[a']; for policy models
// it is softmax(logits(x))[a']. The view also translates defender
// observations into the surrogate's input space (identity when the model
// was trained on the full topology / white-box).
struct SurrogateView {
    const Mlp* model = nullptr;
    bool policy_head = false;  // score by action probability instead of Q
    // surrogate input bit index -> defender observation bit index;
    // empty means identity
    std::vector<int> input_map;

    std::vector<double> project(const Observation& obs) const;
    int best_action(const Observation& obs) const;
    double score(const Observation& obs, int action) const;
};

struct AttackConfig {
    std::vector<int> l_fp;  // nodes that may be flipped to compromised
    std::vector<int> l_fn;  // nodes that may be flipped to uncompromised
    int limit = 2;          // max FPs and max FNs per step
    bool recompute_reward = true;  // r' from the tampered observation vs copy r
};

struct TamperRecord {
    std::set<int> flipped_to_compromised;    // FPs (node ids)
    std::set<int> flipped_to_uncompromised;  // FNs (node ids)
    Observation original;
    Observation tampered;
};

// State-perturbation poisoning: scores each admissible single-node flip of
// s' under the surrogate's optimal action a', keeps the `limit`
// lowest-scoring flips per kind, applies them jointly. Flips stay within
// the surrogate's visible nodes; link bits are never touched.
std::pair<Experience, TamperRecord> craft_poison(const Experience& exp, const AttackConfig& cfg,
                                                 const SurrogateView& surrogate,
                                                 const Topology& topo,
                                                 const StepContext* ctx = nullptr);

// Baseline: flip k uniformly chosen observable node bits (without
// replacement).
Experience random_perturb(const Experience& exp, int k, const Topology& topo, Rng& rng);

struct SurrogateResult {
    Mlp model;
    SurrogateView view;           // translation into the defender obs space
    CompactTopology subgraph;     // the attacker's re-indexed world
};

// Trains a DDQN on an environment built from the observable subgraph only.
SurrogateResult train_surrogate(const Topology& full, const EnvConfig& env_cfg,
                                const DdqnConfig& agent_cfg, const TrainConfig& train_cfg);

// Runs poisoned trainings with unrestricted candidates (l_fp = l_fn = all
// observable nodes, limit 1) and returns the nodes most frequently chosen
// as FPs / FNs, ties broken by lower id.
std::pair<std::vector<int>, std::vector<int>> derive_candidates(
    const Topology& topo, const EnvConfig& env_cfg, const DdqnConfig& agent_cfg,
    const SurrogateView& surrogate, bool live_model, long episodes, int top_fp, int top_fn,
    uint64_t seed);

// Pipeline stage for agents::train. When `live` is true the surrogate view's
// model pointer is replaced by the learner's own net (white-box setting).
InterceptorFactory make_attack_interceptor(AttackConfig cfg, SurrogateView surrogate,
                                           Topology topo, bool live_model = false,
                                           std::vector<TamperRecord>* log = nullptr);

InterceptorFactory make_random_perturb_interceptor(int k, Topology topo, uint64_t seed);

}  // namespace netdef
