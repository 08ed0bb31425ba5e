#include "netdef/adversary.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <stdexcept>

namespace netdef {

std::vector<double> SurrogateView::project(const Observation& obs) const {
    std::vector<double> x;
    if (input_map.empty()) {
        x.assign(obs.begin(), obs.end());
    } else {
        x.resize(input_map.size());
        for (size_t i = 0; i < input_map.size(); ++i) x[i] = obs[input_map[i]];
    }
    return x;
}

int SurrogateView::best_action(const Observation& obs) const {
    auto out = model->forward(project(obs));
    if (policy_head) out.resize(out.size() - 1);
    int best = 0;
    for (int i = 1; i < static_cast<int>(out.size()); ++i)
        if (out[i] > out[best]) best = i;
    return best;
}

double SurrogateView::score(const Observation& obs, int action) const {
    auto out = model->forward(project(obs));
    if (!policy_head) return out[action];
    out.resize(out.size() - 1);
    return softmax(out)[action];
}

namespace {

// defender obs bit indices the surrogate can see
std::vector<bool> visible_bits(const SurrogateView& view, size_t obs_len) {
    std::vector<bool> vis(obs_len, view.input_map.empty());
    for (int idx : view.input_map) vis[idx] = true;
    return vis;
}

}  // namespace

std::pair<Experience, TamperRecord> craft_poison(const Experience& exp, const AttackConfig& cfg,
                                                 const SurrogateView& surrogate,
                                                 const Topology& topo, const StepContext* ctx) {
    if (cfg.limit < 1) throw std::invalid_argument("attack limit must be >= 1");
    TamperRecord rec;
    rec.original = exp.s_next;
    rec.tampered = exp.s_next;
    const auto vis = visible_bits(surrogate, exp.s_next.size());
    const std::set<int> fp_set(cfg.l_fp.begin(), cfg.l_fp.end());
    const std::set<int> fn_set(cfg.l_fn.begin(), cfg.l_fn.end());

    const int a_opt = surrogate.best_action(exp.s_next);
    std::vector<std::pair<double, int>> fp_scores, fn_scores;  // (score, node id)
    Observation trial = exp.s_next;
    for (int n : topo.observable_nodes) {
        const int bit = topo.node_pos(n);
        if (!vis[bit]) continue;
        if (trial[bit] && fn_set.count(n)) {
            trial[bit] = 0;
            fn_scores.emplace_back(surrogate.score(trial, a_opt), n);
            trial[bit] = 1;
        } else if (!trial[bit] && fp_set.count(n)) {
            trial[bit] = 1;
            fp_scores.emplace_back(surrogate.score(trial, a_opt), n);
            trial[bit] = 0;
        }
    }
    auto keep_lowest = [&](std::vector<std::pair<double, int>>& scores) {
        std::sort(scores.begin(), scores.end());  // by score, then lower node id
        std::set<int> kept;
        for (size_t i = 0; i < scores.size() && static_cast<int>(kept.size()) < cfg.limit; ++i)
            kept.insert(scores[i].second);
        return kept;
    };
    rec.flipped_to_uncompromised = keep_lowest(fn_scores);
    rec.flipped_to_compromised = keep_lowest(fp_scores);
    for (int n : rec.flipped_to_uncompromised) rec.tampered[topo.node_pos(n)] = 0;
    for (int n : rec.flipped_to_compromised) rec.tampered[topo.node_pos(n)] = 1;

    Experience out = exp;
    out.s_next = rec.tampered;
    if (ctx && cfg.recompute_reward && rec.tampered != rec.original)
        out.r = perceived_reward(out, *ctx);
    return {out, rec};
}

Experience random_perturb(const Experience& exp, int k, const Topology& topo, Rng& rng) {
    if (k < 0) throw std::invalid_argument("random_perturb: k must be >= 0");
    Experience out = exp;
    std::vector<int> candidates(topo.observable_nodes.begin(), topo.observable_nodes.end());
    rng.shuffle(candidates);
    const int flips = std::min<int>(k, static_cast<int>(candidates.size()));
    for (int i = 0; i < flips; ++i) {
        const int bit = topo.node_pos(candidates[i]);
        out.s_next[bit] ^= 1;
    }
    return out;
}

SurrogateResult train_surrogate(const Topology& full, const EnvConfig& env_cfg,
                                const DdqnConfig& agent_cfg, const TrainConfig& train_cfg) {
    Topology sub = observable_subgraph(full);
    if (sub.node_count() < 2) throw topology_error("surrogate: observable subgraph is degenerate");
    if (sub.critical.empty())
        throw topology_error("surrogate: no critical node is observable");
    SurrogateResult res;
    res.subgraph = compact(sub);

    // keep only the component containing the critical node so the surrogate
    // environment satisfies the connectivity invariant
    const Topology& ct = res.subgraph.topo;
    std::set<int> all_links;
    for (const Link& l : ct.links) all_links.insert(l.id);
    auto component = reachable_set(ct, all_links, {}, *ct.critical.begin());
    Topology world = ct;
    if (static_cast<int>(component.size()) < ct.node_count()) {
        Topology trimmed;
        trimmed.nodes.assign(component.begin(), component.end());
        for (const Link& l : ct.links)
            if (component.count(l.a) && component.count(l.b)) trimmed.links.push_back(l);
        auto keep = [&](const std::set<int>& s) {
            std::set<int> out;
            for (int n : s)
                if (component.count(n)) out.insert(n);
            return out;
        };
        trimmed.critical = keep(ct.critical);
        trimmed.migration_targets = keep(ct.migration_targets);
        trimmed.initial_compromised = keep(ct.initial_compromised);
        trimmed.observable_nodes = std::set<int>(trimmed.nodes.begin(), trimmed.nodes.end());
        for (const Link& l : trimmed.links) trimmed.observable_links.insert(l.id);
        CompactTopology inner = compact(trimmed);
        // compose translation tables back to the full topology's id space
        CompactTopology composed;
        composed.topo = inner.topo;
        for (int dense = 0; dense < static_cast<int>(inner.node_of.size()); ++dense) {
            int orig = res.subgraph.node_of[inner.node_of[dense]];
            composed.node_of.push_back(orig);
            composed.node_index[orig] = dense;
        }
        for (int dense = 0; dense < static_cast<int>(inner.link_of.size()); ++dense) {
            int orig = res.subgraph.link_of[inner.link_of[dense]];
            composed.link_of.push_back(orig);
            composed.link_index[orig] = dense;
        }
        res.subgraph = std::move(composed);
        world = res.subgraph.topo;
    }
    if (world.initial_compromised.empty())
        throw topology_error("surrogate: no compromised foothold in the observable component");

    TrainResult trained = train_ddqn(world, env_cfg, agent_cfg, train_cfg, {});
    res.model = trained.best_model;

    // translation: surrogate input bit -> defender observation bit
    SurrogateView view;
    view.policy_head = false;
    for (int orig : res.subgraph.node_of) view.input_map.push_back(full.node_pos(orig));
    for (int orig : res.subgraph.link_of)
        view.input_map.push_back(full.node_count() + full.link_pos(orig));
    res.view = view;
    return res;
}

InterceptorFactory make_attack_interceptor(AttackConfig cfg, SurrogateView surrogate, Topology topo,
                                           bool live_model, std::vector<TamperRecord>* log) {
    return [cfg = std::move(cfg), surrogate = std::move(surrogate), topo = std::move(topo),
            live_model, log](const Mlp* live_net) -> Interceptor {
        SurrogateView view = surrogate;
        if (live_model) view.model = live_net;
        return [cfg, view, topo, log](const Experience& e, const StepContext& ctx) {
            auto [tampered, rec] = craft_poison(e, cfg, view, topo, &ctx);
            if (log && rec.tampered != rec.original) log->push_back(rec);
            return std::vector<Experience>{tampered};
        };
    };
}

InterceptorFactory make_random_perturb_interceptor(int k, Topology topo, uint64_t seed) {
    auto rng = std::make_shared<Rng>(seed);
    return fixed_interceptor(
        [k, topo = std::move(topo), rng](const Experience& e, const StepContext& ctx) {
            Experience out = random_perturb(e, k, topo, *rng);
            if (out.s_next != e.s_next) out.r = perceived_reward(out, ctx);
            return std::vector<Experience>{out};
        });
}

std::pair<std::vector<int>, std::vector<int>> derive_candidates(
    const Topology& topo, const EnvConfig& env_cfg, const DdqnConfig& agent_cfg,
    const SurrogateView& surrogate, bool live_model, long episodes, int top_fp, int top_fn,
    uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("derive_candidates: episodes must be >= 1");
    AttackConfig cfg;
    cfg.l_fp.assign(topo.observable_nodes.begin(), topo.observable_nodes.end());
    cfg.l_fn = cfg.l_fp;
    cfg.limit = 1;

    auto log = std::make_shared<std::vector<TamperRecord>>();
    TrainConfig tc;
    tc.episodes = episodes;
    tc.seed = seed;
    train_ddqn(topo, env_cfg, agent_cfg, tc,
               {make_attack_interceptor(cfg, surrogate, topo, live_model, log.get())});

    std::map<int, long> fp_count, fn_count;
    for (const TamperRecord& rec : *log) {
        for (int n : rec.flipped_to_compromised) ++fp_count[n];
        for (int n : rec.flipped_to_uncompromised) ++fn_count[n];
    }
    auto top = [](const std::map<int, long>& counts, int k) {
        std::vector<std::pair<long, int>> ranked;  // (-count, id) sorts ties by lower id
        for (auto [n, c] : counts) ranked.emplace_back(-c, n);
        std::sort(ranked.begin(), ranked.end());
        std::vector<int> out;
        for (size_t i = 0; i < ranked.size() && static_cast<int>(out.size()) < k; ++i)
            out.push_back(ranked[i].second);
        std::sort(out.begin(), out.end());
        return out;
    };
    return {top(fp_count, top_fp), top(fn_count, top_fn)};
}

}  // namespace netdef
