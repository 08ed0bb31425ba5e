#include "netdef/agents.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace netdef {

InterceptorFactory fixed_interceptor(Interceptor fn) {
    return [fn = std::move(fn)](const Mlp*) { return fn; };
}

double perceived_reward(const Experience& e, const StepContext& ctx) {
    const Topology& t = *ctx.topo;
    const int n = t.node_count();
    std::set<int> perceived;
    for (int i = 0; i < n; ++i)
        if (e.s_next[i]) perceived.insert(t.nodes[i]);
    const bool critical_down = perceived.count(ctx.critical) > 0;
    const Action a = ctx.actions->decode(e.a);
    if (critical_down || !ctx.action_valid)
        return reward(t, *ctx.reward_params, ctx.t, 0, 0, a, critical_down, ctx.action_valid);

    std::set<int> up;
    for (int i = 0; i < t.link_count(); ++i)
        if (e.s_next[n + i]) up.insert(t.links[i].id);
    std::set<int> excluded = perceived;
    excluded.erase(ctx.critical);
    auto reach = reachable_set(t, up, excluded, ctx.critical);
    const int unreachable = n - static_cast<int>(reach.size());
    int fresh = 0;
    for (int i = 0; i < n; ++i)
        if (e.s_next[i] && !e.s[i]) ++fresh;
    return reward(t, *ctx.reward_params, ctx.t, unreachable, fresh, a, false, true);
}

// ---------------------------------------------------------------- PerBuffer

PerBuffer::PerBuffer(int capacity, double priority_exponent, double floor_priority)
    : capacity_(capacity), alpha_(priority_exponent), floor_(floor_priority) {
    if (capacity <= 0) throw std::invalid_argument("PerBuffer capacity must be positive");
    tree_base_ = 1;
    while (tree_base_ < capacity_) tree_base_ <<= 1;
    tree_.assign(static_cast<size_t>(tree_base_) * 2, 0.0);
    items_.resize(capacity_);
    raw_priority_.assign(capacity_, 0.0);
}

void PerBuffer::set_weight(int slot, double p) {
    size_t i = static_cast<size_t>(tree_base_) + slot;
    tree_[i] = p;
    for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

void PerBuffer::add(Experience e) {
    items_[head_] = std::move(e);
    raw_priority_[head_] = max_priority_;
    set_weight(head_, std::pow(max_priority_, alpha_));
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

void PerBuffer::update_priority(int slot, double td_error) {
    double p = std::abs(td_error) + floor_;
    raw_priority_[slot] = p;
    max_priority_ = std::max(max_priority_, p);
    set_weight(slot, std::pow(p, alpha_));
}

PerBuffer::Batch PerBuffer::sample(int batch_size, double is_exponent, Rng& rng) const {
    if (size_ == 0) throw std::runtime_error("PerBuffer::sample on empty buffer");
    Batch batch;
    const double total = tree_[1];
    for (int k = 0; k < batch_size; ++k) {
        double u = rng.uniform01() * total;
        size_t i = 1;
        while (i < static_cast<size_t>(tree_base_)) {
            if (u < tree_[2 * i] || tree_[2 * i + 1] <= 0.0) {
                i = 2 * i;
            } else {
                u -= tree_[2 * i];
                i = 2 * i + 1;
            }
        }
        int slot = static_cast<int>(i - tree_base_);
        slot = std::min(slot, size_ - 1);
        batch.slots.push_back(slot);
        batch.items.push_back(items_[slot]);
    }
    // importance weights (n * P_i)^(-is_exponent), max-normalized
    batch.weights.resize(batch.slots.size());
    double wmax = 0.0;
    for (size_t k = 0; k < batch.slots.size(); ++k) {
        const double prob = tree_[static_cast<size_t>(tree_base_) + batch.slots[k]] / total;
        batch.weights[k] = std::pow(static_cast<double>(size_) * prob, -is_exponent);
        wmax = std::max(wmax, batch.weights[k]);
    }
    if (wmax > 0.0)
        for (double& w : batch.weights) w /= wmax;
    return batch;
}

// ---------------------------------------------------------------- DDQN

double EpsSchedule::at(long step) const {
    if (decay_steps <= 0 || step >= decay_steps) return end;
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
}

DdqnAgent::DdqnAgent(int obs_dim, int n_actions, DdqnConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)),
      n_actions_(n_actions),
      main_([&] {
          std::vector<int> sizes{obs_dim};
          for (int h : cfg_.hidden) sizes.push_back(h);
          sizes.push_back(n_actions);
          return Mlp::create(sizes, init_rng);
      }()),
      target_(main_),
      replay_(cfg_.buffer_capacity, cfg_.per_alpha, cfg_.priority_floor) {
    opt_.lr = cfg_.lr;
    opt_.init(main_);
}

std::vector<double> DdqnAgent::q_values(const Observation& obs) const {
    return main_.forward_bits(obs);
}

namespace {
int argmax_low(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}
}  // namespace

int DdqnAgent::greedy_action(const Observation& obs) const { return argmax_low(q_values(obs)); }

int DdqnAgent::select_action(const Observation& obs, double epsilon, Rng& rng) const {
    if (rng.uniform01() < epsilon) return rng.uniform_index(n_actions_);
    return greedy_action(obs);
}

std::vector<double> DdqnAgent::ddqn_targets(const Mlp& main, const Mlp& target,
                                            const std::vector<Experience>& batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("ddqn_targets: empty batch");
    std::vector<double> y(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const Experience& e = batch[i];
        if (e.done) {
            y[i] = e.r;
        } else {
            const int a_star = argmax_low(main.forward_bits(e.s_next));
            y[i] = e.r + gamma * target.forward_bits(e.s_next)[a_star];
        }
    }
    return y;
}

double DdqnAgent::learn(Rng& rng) {
    const double is_exp =
        cfg_.per_is_start +
        (cfg_.per_is_end - cfg_.per_is_start) *
            std::min(1.0, static_cast<double>(global_step) / static_cast<double>(cfg_.per_is_steps));
    auto batch = replay_.sample(cfg_.batch_size, is_exp, rng);
    auto targets = ddqn_targets(main_, target_, batch.items, cfg_.gamma);

    Mlp::Grads grads = Mlp::Grads::zeros_like(main_);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.items.size());
    for (size_t i = 0; i < batch.items.size(); ++i) {
        const Experience& e = batch.items[i];
        std::vector<double> x(e.s.begin(), e.s.end());
        Mlp::Cache cache;
        auto q = main_.forward(x, cache);
        const double td = targets[i] - q[e.a];
        loss += batch.weights[i] * td * td * inv_n;
        std::vector<double> up(q.size(), 0.0);
        up[e.a] = -2.0 * batch.weights[i] * td * inv_n;
        grads.accumulate(main_.backward(cache, up));
        replay_.update_priority(batch.slots[i], td);
    }
    opt_.apply(main_, grads);
    ++update_count_;
    if (update_count_ % cfg_.target_sync == 0) target_ = main_;
    return loss;
}

// ---------------------------------------------------------------- eval

EvalOutcome evaluate_greedy(const Topology& topo, const EnvConfig& env_cfg,
                            const std::function<int(const Observation&)>& policy) {
    EnvConfig cfg = env_cfg;
    cfg.detection_rate = 1.0;
    cfg.attacker = AttackerPolicy::Greedy;
    Environment env(topo, cfg);
    Observation obs = env.reset(cfg.seed);
    EvalOutcome out;
    while (!env.done()) {
        int a = policy(obs);
        out.actions.push_back(env.actions().decode(a));
        auto sr = env.step_index(a);
        out.episode_return += sr.reward;
        obs = sr.obs;
    }
    out.critical_compromised = env.state().compromised.count(env.state().critical) > 0;
    out.preserved = env.preserved_nodes();
    return out;
}

// ---------------------------------------------------------------- DDQN driver

TrainResult train_ddqn(const Topology& topo, const EnvConfig& env_cfg, const DdqnConfig& agent_cfg,
                       const TrainConfig& train_cfg,
                       const std::vector<InterceptorFactory>& interceptor_factories) {
    Rng init_rng(train_cfg.seed);
    Environment env(topo, env_cfg);
    DdqnAgent agent(env.obs_size(), env.actions().size(), agent_cfg, init_rng);
    std::vector<Interceptor> interceptors;
    for (const auto& f : interceptor_factories) interceptors.push_back(f(&agent.main_net()));

    Rng rng(train_cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
    TrainResult result;
    result.best_model = agent.main_net();
    bool have_best = false;

    auto greedy = [&](const Observation& o) { return agent.greedy_action(o); };
    auto maybe_eval = [&] {
        EvalOutcome eval = evaluate_greedy(topo, env_cfg, greedy);
        if (!have_best || eval.episode_return > result.best_eval.episode_return) {
            have_best = true;
            result.best_eval = eval;
            result.best_model = agent.main_net();
        }
    };

    for (long ep = 0; ep < train_cfg.episodes; ++ep) {
        Observation obs = env.reset(env_cfg.seed + static_cast<uint64_t>(ep) + 1);
        double ep_return = 0.0;
        while (!env.done()) {
            const double eps = agent_cfg.eps.at(agent.global_step);
            const int a = agent.select_action(obs, eps, rng);
            auto sr = env.step_index(a);
            ++agent.global_step;
            StepContext ctx{&env.topology(), &env.config().reward, &env.actions(),
                            env.state().t,   sr.action_valid,      env.state().critical};
            std::vector<Experience> out{{obs, a, sr.obs, sr.reward, sr.done}};
            for (const auto& ic : interceptors) {
                std::vector<Experience> next;
                for (const auto& x : out) {
                    auto ys = ic(x, ctx);
                    next.insert(next.end(), ys.begin(), ys.end());
                }
                out = std::move(next);
            }
            for (auto& x : out) agent.observe(std::move(x));
            if (agent.replay().size() >= agent_cfg.warmup) agent.learn(rng);
            ep_return += sr.reward;
            obs = sr.obs;
        }
        const bool down = env.state().compromised.count(env.state().critical) > 0;
        result.curve.push_back({ep, ep_return, env.preserved_nodes(), down});
        if ((ep + 1) % train_cfg.eval_period == 0) maybe_eval();
    }
    maybe_eval();
    result.final_model = agent.main_net();
    return result;
}

// ---------------------------------------------------------------- actor-critic

ActorCriticAgent::ActorCriticAgent(int obs_dim, int n_actions, ActorCriticConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)), n_actions_(n_actions), net_([&] {
          std::vector<int> sizes{obs_dim};
          for (int h : cfg_.hidden) sizes.push_back(h);
          sizes.push_back(n_actions + 1);
          return Mlp::create(sizes, init_rng);
      }()) {
    if (cfg_.workers < 1) throw std::invalid_argument("actor-critic needs at least one worker");
    opt_.lr = cfg_.lr;
    opt_.init(net_);
}

std::vector<double> ActorCriticAgent::policy(const Observation& obs) const {
    std::lock_guard lock(mutex_);
    auto out = net_.forward_bits(obs);
    out.resize(n_actions_);
    return softmax(out);
}

double ActorCriticAgent::value(const Observation& obs) const {
    std::lock_guard lock(mutex_);
    return net_.forward_bits(obs)[n_actions_];
}

int ActorCriticAgent::sample_action(const Observation& obs, Rng& rng) const {
    auto p = policy(obs);
    double u = rng.uniform01();
    double acc = 0.0;
    for (int i = 0; i < n_actions_; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return n_actions_ - 1;
}

int ActorCriticAgent::greedy_action(const Observation& obs) const {
    auto p = policy(obs);
    return argmax_low(p);
}

Mlp ActorCriticAgent::snapshot() const {
    std::lock_guard lock(mutex_);
    return net_;
}

void ActorCriticAgent::apply_grads(const Mlp::Grads& grads) {
    std::lock_guard lock(mutex_);
    opt_.apply(net_, grads);
}

AcLoss ActorCriticAgent::update(const std::vector<Experience>& rollout, bool episode_done) {
    if (rollout.empty()) throw std::invalid_argument("ac update: empty rollout");
    Mlp net = snapshot();
    double ret = 0.0;
    if (!episode_done) ret = net.forward_bits(rollout.back().s_next)[n_actions_];

    Mlp::Grads grads = Mlp::Grads::zeros_like(net);
    AcLoss loss;
    const double inv_n = 1.0 / static_cast<double>(rollout.size());
    for (int i = static_cast<int>(rollout.size()) - 1; i >= 0; --i) {
        const Experience& e = rollout[i];
        ret = e.r + cfg_.gamma * ret;
        std::vector<double> x(e.s.begin(), e.s.end());
        Mlp::Cache cache;
        auto out = net.forward(x, cache);
        const double v = out[n_actions_];
        std::vector<double> logits(out.begin(), out.begin() + n_actions_);
        auto pi = softmax(logits);
        const double advantage = ret - v;

        double entropy = 0.0;
        for (double p : pi)
            if (p > 0.0) entropy -= p * std::log(p);
        loss.policy += -std::log(std::max(pi[e.a], 1e-12)) * advantage * inv_n;
        loss.value += advantage * advantage * inv_n;
        loss.entropy += entropy * inv_n;

        std::vector<double> up(out.size(), 0.0);
        for (int j = 0; j < n_actions_; ++j) {
            const double dpolicy = (pi[j] - (j == e.a ? 1.0 : 0.0)) * advantage;
            const double dentropy = pi[j] * (std::log(std::max(pi[j], 1e-12)) + entropy);
            up[j] = (dpolicy + cfg_.entropy_coef * dentropy) * inv_n;
        }
        up[n_actions_] = 2.0 * cfg_.value_coef * (v - ret) * inv_n;
        grads.accumulate(net.backward(cache, up));
    }
    if (cfg_.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (const auto& layer : grads.w)
            for (double g : layer) norm2 += g * g;
        for (const auto& layer : grads.b)
            for (double g : layer) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > cfg_.grad_clip) grads.scale(cfg_.grad_clip / norm);
    }
    apply_grads(grads);
    return loss;
}

TrainResult train_actor_critic(const Topology& topo, const EnvConfig& env_cfg,
                               const ActorCriticConfig& agent_cfg, const TrainConfig& train_cfg,
                               const std::vector<InterceptorFactory>& interceptor_factories) {
    Rng init_rng(train_cfg.seed);
    Environment probe(topo, env_cfg);
    ActorCriticAgent agent(probe.obs_size(), probe.actions().size(), agent_cfg, init_rng);

    TrainResult result;
    result.best_model = agent.net();
    bool have_best = false;
    std::mutex result_mutex;
    std::atomic<long> next_episode{0};

    auto maybe_eval = [&] {
        Mlp snap = agent.snapshot();
        const int n_actions = agent.n_actions();
        auto greedy = [&snap, n_actions](const Observation& o) {
            auto out = snap.forward_bits(o);
            out.resize(n_actions);
            return argmax_low(out);
        };
        EvalOutcome eval = evaluate_greedy(topo, env_cfg, greedy);
        std::lock_guard lock(result_mutex);
        if (!have_best || eval.episode_return > result.best_eval.episode_return) {
            have_best = true;
            result.best_eval = eval;
            result.best_model = snap;
        }
    };

    auto worker = [&](int worker_id) {
        Environment env(topo, env_cfg);
        std::vector<Interceptor> interceptors;
        for (const auto& f : interceptor_factories) interceptors.push_back(f(&agent.net()));
        Rng rng(train_cfg.seed * 0x9e3779b97f4a7c15ULL + 17 + static_cast<uint64_t>(worker_id));
        long ep;
        while ((ep = next_episode.fetch_add(1)) < train_cfg.episodes) {
            Observation obs = env.reset(env_cfg.seed + static_cast<uint64_t>(ep) + 1);
            double ep_return = 0.0;
            std::vector<Experience> rollout;
            while (!env.done()) {
                const int a = agent.sample_action(obs, rng);
                auto sr = env.step_index(a);
                StepContext ctx{&env.topology(), &env.config().reward, &env.actions(),
                                env.state().t,   sr.action_valid,      env.state().critical};
                std::vector<Experience> out{{obs, a, sr.obs, sr.reward, sr.done}};
                for (const auto& ic : interceptors) {
                    std::vector<Experience> next;
                    for (const auto& x : out) {
                        auto ys = ic(x, ctx);
                        next.insert(next.end(), ys.begin(), ys.end());
                    }
                    out = std::move(next);
                }
                for (auto& x : out) rollout.push_back(std::move(x));
                ep_return += sr.reward;
                obs = sr.obs;
                if (static_cast<int>(rollout.size()) >= agent_cfg.rollout_len || env.done()) {
                    agent.update(rollout, env.done());
                    rollout.clear();
                }
            }
            const bool down = env.state().compromised.count(env.state().critical) > 0;
            {
                std::lock_guard lock(result_mutex);
                result.curve.push_back({ep, ep_return, env.preserved_nodes(), down});
            }
            if ((ep + 1) % train_cfg.eval_period == 0) maybe_eval();
        }
    };

    if (agent_cfg.workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < agent_cfg.workers; ++w) threads.emplace_back(worker, w);
        for (auto& th : threads) th.join();
    }
    maybe_eval();
    std::sort(result.curve.begin(), result.curve.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.episode < b.episode; });
    result.final_model = agent.snapshot();
    return result;
}

}  // namespace netdef
