#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "netdef/rng.hpp"
#include "netdef/topology.hpp"

namespace netdef {

// Binary feature vector: node bits (ascending node order) then link bits.
using Observation = std::vector<uint8_t>;

enum class ActionKind { Isolate, Reconnect, Migrate, NoOp };

struct Action {
    ActionKind kind = ActionKind::NoOp;
    int node = -1;

    bool operator==(const Action&) const = default;
};

std::string to_string(const Action& a);

// Fixed enumeration of the discrete action set for a topology:
// isolate per node, reconnect per node, migrate per sorted N_M, NoOp last.
class ActionSpace {
public:
    explicit ActionSpace(const Topology& t);
    int size() const { return static_cast<int>(node_ids_.size()) * 2 + static_cast<int>(migrate_ids_.size()) + 1; }
    Action decode(int index) const;
    int encode(const Action& a) const;

private:
    std::vector<int> node_ids_;
    std::vector<int> migrate_ids_;
};

struct NetState {
    std::set<int> compromised;
    std::set<int> isolated;
    std::set<int> detected;          // subset of compromised
    std::vector<uint8_t> link_up;    // by link position
    int critical = -1;
    int t = 0;
};

struct RewardParams {
    double alpha = 1.0;
    double beta = 1.01;
    double r_c = 0.05;
    double r_m = 0.1;
};

enum class AttackerPolicy { Greedy, UniformRandom };

struct EnvConfig {
    RewardParams reward;
    double detection_rate = 0.9;
    AttackerPolicy attacker = AttackerPolicy::Greedy;
    int attacker_k = 1;  // nodes compromised per step
    int t_max = 50;
    uint64_t seed = 0;
};

Observation encode(const Topology& t, const NetState& s, const std::set<int>& perceived_compromised);

bool is_valid(const Topology& t, const NetState& s, const Action& a);

// Step reward; -1 on compromised critical or invalid action.
double reward(const Topology& t, const RewardParams& p, int step, int unreachable,
              int newly_compromised, const Action& a, bool critical_compromised,
              bool action_valid);

// Applies a defender action in place. Invalid actions must be filtered by
// the caller; the mutation itself is total.
void defender_apply(const Topology& t, NetState& s, const Action& a);

// One attacker move: compromises up to k frontier nodes, runs detection
// Bernoulli trials (fresh compromises and retries of undetected ones).
// Returns the newly compromised node set.
std::set<int> attacker_apply(const Topology& t, NetState& s, AttackerPolicy policy, int k,
                             double detection_rate, Rng& rng);

class Environment {
public:
    Environment(Topology topo, EnvConfig cfg);

    Observation reset(uint64_t seed);

    struct StepResult {
        Observation obs;
        double reward = 0.0;
        bool done = false;
        bool action_valid = true;
        std::set<int> newly_compromised;
    };
    StepResult step(const Action& a);
    StepResult step_index(int action_index) { return step(actions_.decode(action_index)); }

    const Topology& topology() const { return topo_; }
    const NetState& state() const { return state_; }
    const EnvConfig& config() const { return cfg_; }
    const ActionSpace& actions() const { return actions_; }
    bool done() const { return done_; }
    int obs_size() const { return topo_.node_count() + topo_.link_count(); }

    Observation observe() const { return encode(topo_, state_, state_.detected); }

    // Nodes reachable from the critical server over up links, excluding
    // isolated and compromised nodes; 0 when the critical node has fallen.
    int preserved_nodes() const;

private:
    Topology topo_;
    EnvConfig cfg_;
    ActionSpace actions_;
    NetState state_;
    Rng rng_;
    bool done_ = true;
};

// up-link ids of s given t (a link is up iff no endpoint is isolated)
std::set<int> up_link_ids(const Topology& t, const NetState& s);

int preserved_count(const Topology& t, const NetState& s);

}  // namespace netdef
