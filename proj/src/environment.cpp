#include "netdef/environment.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace netdef {

std::string to_string(const Action& a) {
    switch (a.kind) {
        case ActionKind::Isolate: return "isolate(" + std::to_string(a.node) + ")";
        case ActionKind::Reconnect: return "reconnect(" + std::to_string(a.node) + ")";
        case ActionKind::Migrate: return "migrate(" + std::to_string(a.node) + ")";
        case ActionKind::NoOp: return "noop";
    }
    return "?";
}

ActionSpace::ActionSpace(const Topology& t)
    : node_ids_(t.nodes), migrate_ids_(t.migration_targets.begin(), t.migration_targets.end()) {}

Action ActionSpace::decode(int index) const {
    const int n = static_cast<int>(node_ids_.size());
    const int m = static_cast<int>(migrate_ids_.size());
    if (index < 0 || index >= size()) throw std::out_of_range("action index out of range");
    if (index < n) return {ActionKind::Isolate, node_ids_[index]};
    if (index < 2 * n) return {ActionKind::Reconnect, node_ids_[index - n]};
    if (index < 2 * n + m) return {ActionKind::Migrate, migrate_ids_[index - 2 * n]};
    return {ActionKind::NoOp, -1};
}

int ActionSpace::encode(const Action& a) const {
    const int n = static_cast<int>(node_ids_.size());
    auto pos = [&](const std::vector<int>& v, int id) {
        auto it = std::lower_bound(v.begin(), v.end(), id);
        if (it == v.end() || *it != id) throw std::out_of_range("action node id not in space");
        return static_cast<int>(it - v.begin());
    };
    switch (a.kind) {
        case ActionKind::Isolate: return pos(node_ids_, a.node);
        case ActionKind::Reconnect: return n + pos(node_ids_, a.node);
        case ActionKind::Migrate: return 2 * n + pos(migrate_ids_, a.node);
        case ActionKind::NoOp: return size() - 1;
    }
    throw std::out_of_range("bad action kind");
}

Observation encode(const Topology& t, const NetState& s, const std::set<int>& perceived) {
    Observation obs(t.node_count() + t.link_count(), 0);
    for (int n : perceived) obs[t.node_pos(n)] = 1;
    for (int i = 0; i < t.link_count(); ++i) obs[t.node_count() + i] = s.link_up[i];
    return obs;
}

bool is_valid(const Topology& t, const NetState& s, const Action& a) {
    switch (a.kind) {
        case ActionKind::Isolate:
            return t.has_node(a.node) && !s.isolated.count(a.node);
        case ActionKind::Reconnect:
            return t.has_node(a.node) && s.isolated.count(a.node) > 0;
        case ActionKind::Migrate:
            return t.migration_targets.count(a.node) > 0 && a.node != s.critical &&
                   !s.isolated.count(a.node) && !s.compromised.count(a.node);
        case ActionKind::NoOp:
            return true;
    }
    return false;
}

double reward(const Topology& t, const RewardParams& p, int step, int unreachable,
              int newly_compromised, const Action& a, bool critical_compromised,
              bool action_valid) {
    if (critical_compromised || !action_valid) return -1.0;
    const double bt = std::pow(p.beta, step);
    const double frac = static_cast<double>(unreachable) / static_cast<double>(t.node_count());
    double r = (1.0 - p.alpha * frac * bt) - newly_compromised * p.r_c * bt;
    if (a.kind == ActionKind::Migrate) r -= p.r_m;
    return r;
}

namespace {

void refresh_links(const Topology& t, NetState& s) {
    s.link_up.assign(t.link_count(), 1);
    for (int i = 0; i < t.link_count(); ++i) {
        const Link& l = t.links[i];
        if (s.isolated.count(l.a) || s.isolated.count(l.b)) s.link_up[i] = 0;
    }
}

}  // namespace

void defender_apply(const Topology& t, NetState& s, const Action& a) {
    switch (a.kind) {
        case ActionKind::Isolate:
            s.isolated.insert(a.node);
            s.compromised.erase(a.node);  // isolation patches the node
            s.detected.erase(a.node);
            break;
        case ActionKind::Reconnect:
            s.isolated.erase(a.node);
            break;
        case ActionKind::Migrate:
            s.critical = a.node;
            break;
        case ActionKind::NoOp:
            break;
    }
    refresh_links(t, s);
}

std::set<int> up_link_ids(const Topology& t, const NetState& s) {
    std::set<int> up;
    for (int i = 0; i < t.link_count(); ++i)
        if (s.link_up[i]) up.insert(t.links[i].id);
    return up;
}

namespace {

// hop distance to the critical node over up observable links, for the
// greedy in-environment attacker
std::unordered_map<int, int> observable_distances(const Topology& t, const NetState& s) {
    std::unordered_map<int, std::vector<int>> adj;
    for (int i = 0; i < t.link_count(); ++i) {
        const Link& l = t.links[i];
        if (!s.link_up[i] || !t.observable_links.count(l.id)) continue;
        adj[l.a].push_back(l.b);
        adj[l.b].push_back(l.a);
    }
    std::unordered_map<int, int> dist;
    if (!t.observable_nodes.count(s.critical)) return dist;
    dist[s.critical] = 0;
    std::deque<int> q{s.critical};
    while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int v : adj[u])
            if (!dist.count(v)) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
    }
    return dist;
}

}  // namespace

std::set<int> attacker_apply(const Topology& t, NetState& s, AttackerPolicy policy, int k,
                             double detection_rate, Rng& rng) {
    std::set<int> newly;
    for (int step = 0; step < k; ++step) {
        std::set<int> frontier;
        for (int i = 0; i < t.link_count(); ++i) {
            const Link& l = t.links[i];
            if (!s.link_up[i] || !t.observable_links.count(l.id)) continue;
            if (s.compromised.count(l.a) && !s.compromised.count(l.b) && !s.isolated.count(l.b))
                frontier.insert(l.b);
            if (s.compromised.count(l.b) && !s.compromised.count(l.a) && !s.isolated.count(l.a))
                frontier.insert(l.a);
        }
        if (frontier.empty()) break;
        int chosen = -1;
        if (policy == AttackerPolicy::UniformRandom) {
            std::vector<int> v(frontier.begin(), frontier.end());
            chosen = v[rng.uniform_index(static_cast<int>(v.size()))];
        } else {
            auto dist = observable_distances(t, s);
            int best_d = std::numeric_limits<int>::max();
            for (int n : frontier) {  // set iteration is ascending: ties pick lowest id
                int d = dist.count(n) ? dist.at(n) : std::numeric_limits<int>::max();
                if (d < best_d || chosen == -1) {
                    best_d = d;
                    chosen = n;
                }
            }
        }
        s.compromised.insert(chosen);
        newly.insert(chosen);
    }
    // detection trials: fresh compromises plus retries of undetected ones
    for (int n : s.compromised)
        if (!s.detected.count(n) && rng.bernoulli(detection_rate)) s.detected.insert(n);
    return newly;
}

Environment::Environment(Topology topo, EnvConfig cfg)
    : topo_(std::move(topo)), cfg_(cfg), actions_(topo_), rng_(cfg.seed) {
    reset(cfg.seed);
}

Observation Environment::reset(uint64_t seed) {
    rng_ = Rng(seed);
    state_ = NetState{};
    state_.compromised = topo_.initial_compromised;
    if (topo_.critical.empty()) throw topology_error("environment requires a critical node");
    state_.critical = *topo_.critical.begin();
    state_.t = 0;
    refresh_links(topo_, state_);
    for (int n : state_.compromised)
        if (rng_.bernoulli(cfg_.detection_rate)) state_.detected.insert(n);
    done_ = false;
    return observe();
}

int preserved_count(const Topology& t, const NetState& s) {
    if (s.compromised.count(s.critical)) return 0;
    std::set<int> excluded;
    for (int n : s.isolated) excluded.insert(n);
    for (int n : s.compromised) excluded.insert(n);
    excluded.erase(s.critical);
    auto reach = reachable_set(t, up_link_ids(t, s), excluded, s.critical);
    return static_cast<int>(reach.size());
}

int Environment::preserved_nodes() const { return preserved_count(topo_, state_); }

Environment::StepResult Environment::step(const Action& a) {
    if (done_) throw std::runtime_error("step() after episode end");
    StepResult res;
    res.action_valid = is_valid(topo_, state_, a);
    if (res.action_valid) defender_apply(topo_, state_, a);
    res.newly_compromised =
        attacker_apply(topo_, state_, cfg_.attacker, cfg_.attacker_k, cfg_.detection_rate, rng_);
    state_.t += 1;

    const bool critical_down = state_.compromised.count(state_.critical) > 0;
    int unreachable = 0;
    if (!critical_down) unreachable = topo_.node_count() - preserved_count(topo_, state_);
    res.reward = reward(topo_, cfg_.reward, state_.t, unreachable,
                        static_cast<int>(res.newly_compromised.size()), a, critical_down,
                        res.action_valid);
    done_ = critical_down || state_.t >= cfg_.t_max || state_.compromised.empty();
    res.done = done_;
    res.obs = observe();
    return res;
}

}  // namespace netdef
