#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "netdef/environment.hpp"
#include "netdef/neuralnet.hpp"

namespace netdef {

struct Experience {
    Observation s;
    int a = 0;  // action index
    Observation s_next;
    double r = 0.0;
    bool done = false;

    bool operator==(const Experience&) const = default;
};

// Per-step context handed to experience interceptors so that tampered /
// corrected rewards can be recomputed from the perceived observation.
struct StepContext {
    const Topology* topo = nullptr;
    const RewardParams* reward_params = nullptr;
    const ActionSpace* actions = nullptr;
    int t = 0;
    bool action_valid = true;
    int critical = -1;
};

// An interceptor maps one incoming experience to the experiences that
// actually reach the replay buffer / update (one for attacks, one or two
// for the inversion defence). Interceptors shape only what is buffered;
// the agent keeps acting on the environment's own observation.
using Interceptor = std::function<std::vector<Experience>(const Experience&, const StepContext&)>;

// Some pipeline stages score with the learner's own live network (the
// white-box attack and the inversion defence); factories receive that net
// when the training loop starts. Stages with their own model ignore it.
using InterceptorFactory = std::function<Interceptor(const Mlp* live_net)>;

InterceptorFactory fixed_interceptor(Interceptor fn);

// Recomputes the step reward from a (possibly tampered) observation pair:
// perceived U_t from reachability over perceived-up links excluding
// perceived-compromised nodes, perceived C_t from fresh node bits.
double perceived_reward(const Experience& e, const StepContext& ctx);

// Proportional prioritized replay over a ring buffer, sum-tree sampling.
class PerBuffer {
public:
    PerBuffer(int capacity, double priority_exponent, double floor_priority = 1e-3);

    void add(Experience e);
    void update_priority(int slot, double td_error);

    struct Batch {
        std::vector<int> slots;
        std::vector<Experience> items;
        std::vector<double> weights;  // importance weights, max-normalized
    };
    Batch sample(int batch_size, double is_exponent, Rng& rng) const;

    int size() const { return size_; }
    int capacity() const { return capacity_; }
    double priority(int slot) const { return raw_priority_[slot]; }

private:
    void set_weight(int slot, double p);
    int capacity_;
    double alpha_;
    double floor_;
    double max_priority_ = 1.0;
    int size_ = 0;
    int head_ = 0;
    std::vector<Experience> items_;
    std::vector<double> raw_priority_;
    std::vector<double> tree_;  // segment tree over priority^alpha
    int tree_base_ = 1;
};

struct EpsSchedule {
    double start = 1.0;
    double end = 0.05;
    long decay_steps = 10000;
    double at(long step) const;
};

struct DdqnConfig {
    std::vector<int> hidden{128, 128};
    double lr = 1e-4;
    double gamma = 0.95;
    EpsSchedule eps;
    int target_sync = 500;
    int batch_size = 32;
    int buffer_capacity = 50000;
    int warmup = 200;  // experiences before updates start
    double per_alpha = 0.6;
    double per_is_start = 0.4;
    double per_is_end = 1.0;
    long per_is_steps = 10000;
    double priority_floor = 1e-3;
};

class DdqnAgent {
public:
    DdqnAgent(int obs_dim, int n_actions, DdqnConfig cfg, Rng& init_rng);

    std::vector<double> q_values(const Observation& obs) const;
    int greedy_action(const Observation& obs) const;  // lowest index on ties
    int select_action(const Observation& obs, double epsilon, Rng& rng) const;

    // y = r for terminal entries; else r + gamma * Q_target(s', argmax Q_main(s', .))
    static std::vector<double> ddqn_targets(const Mlp& main, const Mlp& target,
                                            const std::vector<Experience>& batch, double gamma);

    void observe(Experience e) { replay_.add(std::move(e)); }
    // one sampled batch gradient step; returns weighted squared-TD loss
    double learn(Rng& rng);

    const Mlp& main_net() const { return main_; }
    Mlp& main_net() { return main_; }
    const Mlp& target_net() const { return target_; }
    PerBuffer& replay() { return replay_; }
    const DdqnConfig& config() const { return cfg_; }
    long updates() const { return update_count_; }
    long global_step = 0;  // environment steps taken, drives the eps schedule

private:
    DdqnConfig cfg_;
    int n_actions_;
    Mlp main_, target_;
    Adam opt_;
    PerBuffer replay_;
    long update_count_ = 0;
};

struct ActorCriticConfig {
    std::vector<int> hidden{128, 128};
    double lr = 3e-4;
    double gamma = 0.95;
    int workers = 1;
    int rollout_len = 16;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double grad_clip = 5.0;
};

struct AcLoss {
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
};

// Shared policy/value net: outputs [0..A) are policy logits, output A is V(s).
class ActorCriticAgent {
public:
    ActorCriticAgent(int obs_dim, int n_actions, ActorCriticConfig cfg, Rng& init_rng);

    std::vector<double> policy(const Observation& obs) const;  // probabilities
    double value(const Observation& obs) const;
    int sample_action(const Observation& obs, Rng& rng) const;
    int greedy_action(const Observation& obs) const;

    // n-step advantage update on one rollout; bootstrap from V(last s') when
    // the rollout did not end the episode
    AcLoss update(const std::vector<Experience>& rollout, bool episode_done);

    Mlp snapshot() const;
    void apply_grads(const Mlp::Grads& grads);

    const Mlp& net() const { return net_; }
    int n_actions() const { return n_actions_; }
    const ActorCriticConfig& config() const { return cfg_; }

private:
    ActorCriticConfig cfg_;
    int n_actions_;
    Mlp net_;
    Adam opt_;
    mutable std::mutex mutex_;
};

struct TrainConfig {
    long episodes = 300;
    int eval_period = 50;       // episodes between greedy evaluations
    uint64_t seed = 1;
};

struct CurvePoint {
    long episode;
    double episode_return;
    int preserved;
    bool critical_compromised;
};

struct EvalOutcome {
    double episode_return = 0.0;
    int preserved = 0;
    bool critical_compromised = false;
    std::vector<Action> actions;
};

// Greedy rollout on a deterministic copy of the environment
// (detection 1.0, greedy attacker).
EvalOutcome evaluate_greedy(const Topology& topo, const EnvConfig& env_cfg,
                            const std::function<int(const Observation&)>& policy);

struct TrainResult {
    Mlp best_model;           // best greedy-evaluation checkpoint
    EvalOutcome best_eval;
    Mlp final_model;
    std::vector<CurvePoint> curve;
};

TrainResult train_ddqn(const Topology& topo, const EnvConfig& env_cfg, const DdqnConfig& agent_cfg,
                       const TrainConfig& train_cfg,
                       const std::vector<InterceptorFactory>& interceptors);

TrainResult train_actor_critic(const Topology& topo, const EnvConfig& env_cfg,
                               const ActorCriticConfig& agent_cfg, const TrainConfig& train_cfg,
                               const std::vector<InterceptorFactory>& interceptors);

}  // namespace netdef
