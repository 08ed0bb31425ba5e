#include "netdef/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <json.hpp>

namespace netdef {

using nlohmann::json;

namespace {

GeneratorSpec parse_generator(const json& j) {
    GeneratorSpec g;
    g.node_count = j.at("node_count").get<int>();
    g.link_count = j.at("link_count").get<int>();
    g.critical_count = j.value("critical_count", 1);
    g.migration_count = j.value("migration_count", 1);
    g.initial_compromised_count = j.value("initial_compromised_count", 1);
    g.observable_fraction = j.value("observable_fraction", 0.5);
    g.seed = j.value("seed", uint64_t{0});
    return g;
}

EnvConfig parse_env(const json& j) {
    EnvConfig e;
    if (j.contains("reward")) {
        const json& r = j.at("reward");
        e.reward.alpha = r.value("alpha", e.reward.alpha);
        e.reward.beta = r.value("beta", e.reward.beta);
        e.reward.r_c = r.value("r_c", e.reward.r_c);
        e.reward.r_m = r.value("r_m", e.reward.r_m);
    }
    e.detection_rate = j.value("detection_rate", e.detection_rate);
    std::string att = j.value("attacker", std::string("greedy"));
    if (att == "greedy")
        e.attacker = AttackerPolicy::Greedy;
    else if (att == "uniform")
        e.attacker = AttackerPolicy::UniformRandom;
    else
        throw std::runtime_error("config: unknown attacker policy '" + att + "'");
    e.attacker_k = j.value("k", e.attacker_k);
    e.t_max = j.value("t_max", e.t_max);
    e.seed = j.value("seed", e.seed);
    return e;
}

void parse_agent(const json& j, ExperimentConfig& cfg) {
    cfg.algorithm = j.value("algorithm", cfg.algorithm);
    if (cfg.algorithm != "ddqn" && cfg.algorithm != "a3c")
        throw std::runtime_error("config: unknown algorithm '" + cfg.algorithm + "'");
    if (j.contains("hidden")) {
        cfg.ddqn.hidden = j.at("hidden").get<std::vector<int>>();
        cfg.ac.hidden = cfg.ddqn.hidden;
    }
    cfg.ddqn.lr = j.value("lr", cfg.ddqn.lr);
    cfg.ac.lr = j.value("lr", cfg.ac.lr);
    cfg.ddqn.gamma = j.value("gamma", cfg.ddqn.gamma);
    cfg.ac.gamma = j.value("gamma", cfg.ac.gamma);
    cfg.ddqn.eps.start = j.value("eps_start", cfg.ddqn.eps.start);
    cfg.ddqn.eps.end = j.value("eps_end", cfg.ddqn.eps.end);
    cfg.ddqn.eps.decay_steps = j.value("eps_decay_steps", cfg.ddqn.eps.decay_steps);
    cfg.ddqn.target_sync = j.value("target_sync", cfg.ddqn.target_sync);
    cfg.ddqn.batch_size = j.value("batch_size", cfg.ddqn.batch_size);
    cfg.ddqn.buffer_capacity = j.value("buffer_capacity", cfg.ddqn.buffer_capacity);
    cfg.ddqn.warmup = j.value("warmup", cfg.ddqn.warmup);
    cfg.ddqn.per_alpha = j.value("per_alpha", cfg.ddqn.per_alpha);
    cfg.ddqn.per_is_start = j.value("per_is_start", cfg.ddqn.per_is_start);
    cfg.ddqn.per_is_end = j.value("per_is_end", cfg.ddqn.per_is_end);
    cfg.ddqn.per_is_steps = j.value("per_is_steps", cfg.ddqn.per_is_steps);
    cfg.ac.workers = j.value("workers", cfg.ac.workers);
    cfg.ac.rollout_len = j.value("rollout_len", cfg.ac.rollout_len);
    cfg.ac.entropy_coef = j.value("entropy_coef", cfg.ac.entropy_coef);
    cfg.ac.value_coef = j.value("value_coef", cfg.ac.value_coef);
    cfg.train.episodes = j.value("episodes", cfg.train.episodes);
    cfg.train.eval_period = j.value("eval_period", cfg.train.eval_period);
}

AttackBlock parse_attack(const json& j) {
    AttackBlock a;
    std::string sur = j.value("surrogate", std::string("white_box"));
    if (sur == "white_box")
        a.surrogate = AttackBlock::Surrogate::WhiteBox;
    else if (sur == "train")
        a.surrogate = AttackBlock::Surrogate::Train;
    else {
        a.surrogate = AttackBlock::Surrogate::Checkpoint;
        a.checkpoint_path = sur;
    }
    a.policy_head = j.value("target_style", std::string("q_min")) == "policy_min";
    if (j.contains("derive")) {
        AttackBlock::Derive d;
        const json& dj = j.at("derive");
        d.episodes = dj.value("episodes", d.episodes);
        d.top_fp = dj.value("top_fp", d.top_fp);
        d.top_fn = dj.value("top_fn", d.top_fn);
        a.derive = d;
    } else {
        if (j.contains("l_fp")) a.l_fp = j.at("l_fp").get<std::vector<int>>();
        if (j.contains("l_fn")) a.l_fn = j.at("l_fn").get<std::vector<int>>();
    }
    a.limit = j.value("limit", a.limit);
    a.recompute_reward = j.value("recompute_reward", a.recompute_reward);
    if (j.contains("random_k")) a.random_k = j.at("random_k").get<int>();
    return a;
}

DefenceBlock parse_defence(const json& j) {
    DefenceBlock d;
    d.limit_estimate = j.value("limit_estimate", d.limit_estimate);
    std::string keep = j.value("keep_policy", std::string("corrected_only"));
    if (keep == "corrected_only")
        d.keep = KeepPolicy::CorrectedOnly;
    else if (keep == "keep_both")
        d.keep = KeepPolicy::KeepBoth;
    else
        throw std::runtime_error("config: unknown keep_policy '" + keep + "'");
    d.strict_improvement = j.value("strict_improvement", d.strict_improvement);
    d.recompute_reward = j.value("recompute_reward", d.recompute_reward);
    return d;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
    json j = json::parse(text);
    ExperimentConfig cfg;
    if (j.contains("topology")) {
        const json& t = j.at("topology");
        if (t.contains("file"))
            cfg.topology_file = t.at("file").get<std::string>();
        else if (t.contains("generator"))
            cfg.generator = parse_generator(t.at("generator"));
        else
            throw std::runtime_error("config: topology needs 'file' or 'generator'");
    } else {
        throw std::runtime_error("config: missing 'topology'");
    }
    if (j.contains("environment")) cfg.env = parse_env(j.at("environment"));
    if (j.contains("agent")) parse_agent(j.at("agent"), cfg);
    if (j.contains("attack")) cfg.attack = parse_attack(j.at("attack"));
    if (j.contains("defence")) cfg.defence = parse_defence(j.at("defence"));
    cfg.runs = j.value("runs", cfg.runs);
    if (cfg.runs < 1) throw std::runtime_error("config: runs must be >= 1");
    cfg.base_seed = j.value("base_seed", cfg.base_seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.brute_force_depth = j.value("brute_force_depth", cfg.brute_force_depth);
    return cfg;
}

Topology experiment_topology(const ExperimentConfig& cfg) {
    if (cfg.generator) return generate_topology(*cfg.generator);
    std::ifstream in(cfg.topology_file);
    if (!in) throw std::runtime_error("cannot open topology file " + cfg.topology_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_topology(ss.str());
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::NoImpact: return "no_impact";
        case Outcome::FewerPreserved: return "fewer_preserved";
        case Outcome::Compromised: return "compromised";
    }
    return "?";
}

Outcome classify_outcome(const RunResult& run, int baseline_preserved) {
    if (run.critical_compromised) return Outcome::Compromised;
    if (run.preserved < baseline_preserved) return Outcome::FewerPreserved;
    return Outcome::NoImpact;
}

MetricsSummary summarize(const std::vector<RunResult>& runs, int baseline_preserved) {
    MetricsSummary s;
    s.baseline_preserved = baseline_preserved;
    long n = 0, no_impact = 0, fewer = 0, comp = 0;
    double preserved_sum = 0.0;
    for (const RunResult& r : runs) {
        if (r.failed) {
            ++s.failed_runs;
            continue;
        }
        ++n;
        preserved_sum += r.preserved;
        switch (classify_outcome(r, baseline_preserved)) {
            case Outcome::NoImpact: ++no_impact; break;
            case Outcome::FewerPreserved: ++fewer; break;
            case Outcome::Compromised: ++comp; break;
        }
    }
    s.completed_runs = static_cast<int>(n);
    if (n > 0) {
        s.pct_no_impact = 100.0 * no_impact / n;
        s.pct_fewer_preserved = 100.0 * fewer / n;
        s.pct_compromised = 100.0 * comp / n;
        s.avg_preserved = preserved_sum / n;
    }
    return s;
}

// ---------------------------------------------------------------- brute force

namespace {

bool sim_done(const Topology& t, const EnvConfig& cfg, const NetState& s) {
    return s.compromised.count(s.critical) > 0 || s.t >= cfg.t_max || s.compromised.empty();
}

// one deterministic step (detection rate 1, greedy attacker)
void sim_step(const Topology& t, const EnvConfig& cfg, NetState& s, const Action& a) {
    if (is_valid(t, s, a)) defender_apply(t, s, a);
    Rng rng(0);
    attacker_apply(t, s, AttackerPolicy::Greedy, cfg.attacker_k, 1.0, rng);
    s.t += 1;
}

int rollout_preserved(const Topology& t, const EnvConfig& cfg, NetState s) {
    while (!sim_done(t, cfg, s)) sim_step(t, cfg, s, {ActionKind::NoOp, -1});
    return preserved_count(t, s);
}

struct BfSearch {
    const Topology& topo;
    const EnvConfig& cfg;
    const ActionSpace actions;
    long expansions = 0;
    std::unordered_map<std::string, BruteForceResult> memo;

    explicit BfSearch(const Topology& t, const EnvConfig& c) : topo(t), cfg(c), actions(t) {}

    std::string key(const NetState& s, int depth) const {
        std::string k = std::to_string(depth) + "|" + std::to_string(s.critical) + "|";
        for (int n : s.compromised) k += std::to_string(n) + ",";
        k += "|";
        for (int n : s.isolated) k += std::to_string(n) + ",";
        return k;
    }

    BruteForceResult search(const NetState& s, int depth) {
        if (sim_done(topo, cfg, s)) return {{}, preserved_count(topo, s)};
        if (depth == 0) return {{}, rollout_preserved(topo, cfg, s)};
        const std::string k = key(s, depth);
        if (auto it = memo.find(k); it != memo.end()) return it->second;

        BruteForceResult best{{}, -1};
        for (int idx = 0; idx < actions.size(); ++idx) {
            const Action a = actions.decode(idx);
            if (!is_valid(topo, s, a)) continue;
            if (++expansions > 10'000'000)
                throw std::runtime_error("brute_force_optimum: expansion guard exceeded");
            NetState next = s;
            sim_step(topo, cfg, next, a);
            BruteForceResult sub = search(next, depth - 1);
            if (sub.preserved > best.preserved) {
                best.preserved = sub.preserved;
                best.actions.clear();
                best.actions.push_back(a);
                best.actions.insert(best.actions.end(), sub.actions.begin(), sub.actions.end());
            }
        }
        memo.emplace(k, best);
        return best;
    }
};

}  // namespace

BruteForceResult brute_force_optimum(const Topology& topo, const EnvConfig& env_cfg,
                                     int max_depth) {
    NetState s;
    s.compromised = topo.initial_compromised;
    s.detected = s.compromised;
    if (topo.critical.empty()) throw topology_error("brute force requires a critical node");
    s.critical = *topo.critical.begin();
    s.link_up.assign(topo.link_count(), 1);
    s.t = 0;
    BfSearch bf(topo, env_cfg);
    return bf.search(s, max_depth);
}

// ---------------------------------------------------------------- experiment

namespace {

struct ResolvedAttack {
    std::vector<InterceptorFactory> stages;
};

std::vector<InterceptorFactory> build_pipeline(const ExperimentConfig& cfg, const Topology& topo) {
    std::vector<InterceptorFactory> stages;
    if (cfg.attack) {
        const AttackBlock& ab = *cfg.attack;
        if (ab.random_k) {
            stages.push_back(make_random_perturb_interceptor(*ab.random_k, topo,
                                                             cfg.base_seed * 7919 + 13));
        } else {
            SurrogateView view;
            bool live = false;
            Mlp surrogate_model;
            switch (ab.surrogate) {
                case AttackBlock::Surrogate::WhiteBox:
                    live = true;
                    view.policy_head = cfg.algorithm == "a3c";
                    break;
                case AttackBlock::Surrogate::Train: {
                    TrainConfig tc = cfg.train;
                    tc.seed = cfg.base_seed * 31 + 7;
                    auto sr = train_surrogate(topo, cfg.env, cfg.ddqn, tc);
                    surrogate_model = std::move(sr.model);
                    view = sr.view;
                    view.policy_head = ab.policy_head;
                    break;
                }
                case AttackBlock::Surrogate::Checkpoint: {
                    std::ifstream in(ab.checkpoint_path);
                    if (!in)
                        throw std::runtime_error("cannot open surrogate checkpoint " +
                                                 ab.checkpoint_path);
                    std::stringstream ss;
                    ss << in.rdbuf();
                    json j = json::parse(ss.str());
                    surrogate_model = load_model(j.at("model").dump());
                    view.input_map = j.value("input_map", std::vector<int>{});
                    view.policy_head = j.value("policy_head", ab.policy_head);
                    break;
                }
            }
            AttackConfig ac;
            ac.limit = ab.limit;
            ac.recompute_reward = ab.recompute_reward;
            if (ab.derive) {
                SurrogateView dview = view;
                if (!live) dview.model = &surrogate_model;
                auto [fp, fn] = derive_candidates(topo, cfg.env, cfg.ddqn, dview, live,
                                                  ab.derive->episodes, ab.derive->top_fp,
                                                  ab.derive->top_fn, cfg.base_seed * 131 + 5);
                ac.l_fp = fp;
                ac.l_fn = fn;
            } else {
                ac.l_fp = ab.l_fp;
                ac.l_fn = ab.l_fn;
            }
            if (!live) {
                // own the surrogate model inside the factory closure
                auto owned = std::make_shared<Mlp>(std::move(surrogate_model));
                view.model = owned.get();
                auto inner = make_attack_interceptor(ac, view, topo, false);
                stages.push_back([inner, owned](const Mlp* net) { return inner(net); });
            } else {
                stages.push_back(make_attack_interceptor(ac, view, topo, true));
            }
        }
    }
    if (cfg.defence) {
        DefenceConfig dc;
        dc.limit_estimate = cfg.defence->limit_estimate;
        dc.keep = cfg.defence->keep;
        dc.strict_improvement = cfg.defence->strict_improvement;
        dc.recompute_reward = cfg.defence->recompute_reward;
        dc.policy_head = cfg.algorithm == "a3c";
        stages.push_back(make_defence_interceptor(dc));
    }
    return stages;
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
    Topology topo = experiment_topology(cfg);
    const int baseline = brute_force_optimum(topo, cfg.env, cfg.brute_force_depth).preserved;
    auto stages = build_pipeline(cfg, topo);

    ExperimentOutput out;
    for (int i = 0; i < cfg.runs; ++i) {
        RunResult run;
        run.seed = cfg.base_seed + static_cast<uint64_t>(i);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            TrainConfig tc = cfg.train;
            tc.seed = run.seed;
            EnvConfig env_cfg = cfg.env;
            env_cfg.seed = run.seed * 1000003ULL;
            TrainResult tr = cfg.algorithm == "a3c"
                                 ? train_actor_critic(topo, env_cfg, cfg.ac, tc, stages)
                                 : train_ddqn(topo, env_cfg, cfg.ddqn, tc, stages);
            run.preserved = tr.best_eval.preserved;
            run.critical_compromised = tr.best_eval.critical_compromised;
            run.actions = tr.best_eval.actions;
        } catch (const std::exception& e) {
            run.failed = true;
            run.error = e.what();
        }
        run.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.runs.push_back(std::move(run));
    }
    out.summary = summarize(out.runs, baseline);
    if (!cfg.out_dir.empty()) write_report(cfg.out_dir, out.runs, out.summary);
    return out;
}

TrainResult run_single_training(const ExperimentConfig& cfg, uint64_t seed) {
    Topology topo = experiment_topology(cfg);
    auto stages = build_pipeline(cfg, topo);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    EnvConfig env_cfg = cfg.env;
    env_cfg.seed = seed * 1000003ULL;
    return cfg.algorithm == "a3c" ? train_actor_critic(topo, env_cfg, cfg.ac, tc, stages)
                                  : train_ddqn(topo, env_cfg, cfg.ddqn, tc, stages);
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::string csv = "episode,return,preserved_nodes,critical_compromised\n";
    for (const CurvePoint& p : curve) {
        csv += std::to_string(p.episode) + "," + json(p.episode_return).dump() + "," +
               std::to_string(p.preserved) + "," + (p.critical_compromised ? "1" : "0") + "\n";
    }
    return csv;
}

// ---------------------------------------------------------------- reports

std::string runs_csv(const std::vector<RunResult>& runs, int baseline_preserved) {
    std::string csv = "seed,preserved,critical_compromised,outcome\n";
    for (const RunResult& r : runs) {
        if (r.failed) {
            csv += std::to_string(r.seed) + ",,," + "failed\n";
            continue;
        }
        csv += std::to_string(r.seed) + "," + std::to_string(r.preserved) + "," +
               (r.critical_compromised ? "1" : "0") + "," +
               to_string(classify_outcome(r, baseline_preserved)) + "\n";
    }
    return csv;
}

std::string summary_json(const MetricsSummary& s) {
    json j;
    j["baseline_preserved"] = s.baseline_preserved;
    j["completed_runs"] = s.completed_runs;
    j["failed_runs"] = s.failed_runs;
    j["pct_no_impact"] = s.pct_no_impact;
    j["pct_fewer_preserved"] = s.pct_fewer_preserved;
    j["pct_compromised"] = s.pct_compromised;
    j["avg_preserved"] = s.avg_preserved;
    // plot-ready bar/line series
    j["plot"]["bar_labels"] = {"no_impact", "fewer_preserved", "compromised"};
    j["plot"]["bar_values"] = {s.pct_no_impact, s.pct_fewer_preserved, s.pct_compromised};
    j["plot"]["avg_preserved"] = s.avg_preserved;
    return j.dump(2) + "\n";
}

void write_report(const std::string& dir, const std::vector<RunResult>& runs,
                  const MetricsSummary& summary) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/runs.csv", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + dir + "/runs.csv");
        f << runs_csv(runs, summary.baseline_preserved);
    }
    {
        std::ofstream f(dir + "/summary.json", std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + dir + "/summary.json");
        f << summary_json(summary);
    }
}

std::vector<RunResult> read_runs_csv(const std::string& text) {
    std::vector<RunResult> runs;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string seed, preserved, comp, outcome;
        std::getline(row, seed, ',');
        std::getline(row, preserved, ',');
        std::getline(row, comp, ',');
        std::getline(row, outcome, ',');
        RunResult r;
        r.seed = std::stoull(seed);
        if (outcome == "failed") {
            r.failed = true;
        } else {
            r.preserved = std::stoi(preserved);
            r.critical_compromised = comp == "1";
        }
        runs.push_back(r);
    }
    return runs;
}

}  // namespace netdef
