#pragma once

#include <optional>
#include <string>
#include <vector>

#include "netdef/adversary.hpp"
#include "netdef/agents.hpp"
#include "netdef/defence.hpp"
#include "netdef/environment.hpp"
#include "netdef/topology.hpp"

namespace netdef {

struct AttackBlock {
    enum class Surrogate { WhiteBox, Train, Checkpoint };
    Surrogate surrogate = Surrogate::WhiteBox;
    std::string checkpoint_path;
    bool policy_head = false;  // q_min vs policy_min scoring
    std::vector<int> l_fp, l_fn;
    struct Derive {
        long episodes = 50;
        int top_fp = 4;
        int top_fn = 2;
    };
    std::optional<Derive> derive;  // when set, l_fp/l_fn come from frequency counts
    int limit = 2;
    bool recompute_reward = true;
    std::optional<int> random_k;  // random-perturbation baseline instead of crafted flips
};

struct DefenceBlock {
    int limit_estimate = 2;
    KeepPolicy keep = KeepPolicy::CorrectedOnly;
    bool strict_improvement = true;
    bool recompute_reward = true;
};

struct ExperimentConfig {
    std::string topology_file;
    std::optional<GeneratorSpec> generator;
    EnvConfig env;
    std::string algorithm = "ddqn";  // or "a3c"
    DdqnConfig ddqn;
    ActorCriticConfig ac;
    TrainConfig train;
    std::optional<AttackBlock> attack;
    std::optional<DefenceBlock> defence;
    int runs = 20;
    uint64_t base_seed = 1;
    std::string out_dir;
    int brute_force_depth = 5;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
Topology experiment_topology(const ExperimentConfig& cfg);

struct RunResult {
    uint64_t seed = 0;
    int preserved = 0;
    bool critical_compromised = false;
    std::vector<Action> actions;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string error;
};

enum class Outcome { NoImpact, FewerPreserved, Compromised };
std::string to_string(Outcome o);

Outcome classify_outcome(const RunResult& run, int baseline_preserved);

struct MetricsSummary {
    double pct_no_impact = 0.0;
    double pct_fewer_preserved = 0.0;
    double pct_compromised = 0.0;
    double avg_preserved = 0.0;
    int baseline_preserved = 0;
    int completed_runs = 0;
    int failed_runs = 0;
};

MetricsSummary summarize(const std::vector<RunResult>& runs, int baseline_preserved);

struct ExperimentOutput {
    std::vector<RunResult> runs;
    MetricsSummary summary;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

// One training with the configured attack/defence pipeline; used by the
// `train` CLI subcommand.
TrainResult run_single_training(const ExperimentConfig& cfg, uint64_t seed);

std::string curve_csv(const std::vector<CurvePoint>& curve);

struct BruteForceResult {
    std::vector<Action> actions;
    int preserved = 0;
};

// Exhaustive defender-action search against the deterministic greedy
// attacker (detection rate pinned to 1.0). After the searched prefix the
// episode is rolled out with NoOps. Throws when the guard of 1e7 expansions
// is exceeded.
BruteForceResult brute_force_optimum(const Topology& topo, const EnvConfig& env_cfg, int max_depth);

// runs.csv and summary.json, byte-stable across reruns
std::string runs_csv(const std::vector<RunResult>& runs, int baseline_preserved);
std::string summary_json(const MetricsSummary& summary);
void write_report(const std::string& dir, const std::vector<RunResult>& runs,
                  const MetricsSummary& summary);
std::vector<RunResult> read_runs_csv(const std::string& text);

}  // namespace netdef
