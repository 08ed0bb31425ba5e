#include "netdef/defence.hpp"

#include <algorithm>
#include <stdexcept>

namespace netdef {

namespace {

double model_score(const Mlp& model, const Observation& obs, int action, bool policy_head) {
    std::vector<double> x(obs.begin(), obs.end());
    auto out = model.forward(x);
    if (!policy_head) return out[action];
    out.resize(out.size() - 1);
    return softmax(out)[action];
}

int model_best_action(const Mlp& model, const Observation& obs, bool policy_head) {
    std::vector<double> x(obs.begin(), obs.end());
    auto out = model.forward(x);
    if (policy_head) out.resize(out.size() - 1);
    int best = 0;
    for (int i = 1; i < static_cast<int>(out.size()); ++i)
        if (out[i] > out[best]) best = i;
    return best;
}

}  // namespace

std::vector<Experience> invert(const Experience& exp, const DefenceConfig& cfg, const Mlp& model,
                               int node_bits, const StepContext* ctx) {
    if (cfg.limit_estimate < 1) throw std::invalid_argument("limit_estimate must be >= 1");
    if (static_cast<int>(exp.s_next.size()) != model.input_size())
        throw std::invalid_argument("invert: observation length does not match model input");

    const int a_opt = model_best_action(model, exp.s_next, cfg.policy_head);
    const double base = cfg.strict_improvement
                            ? model_score(model, exp.s_next, a_opt, cfg.policy_head)
                            : 0.0;

    // compromised-observed bits are FP suspects (flip to uncompromised),
    // uncompromised-observed bits are FN suspects (flip to compromised)
    std::vector<std::pair<double, int>> fp_scores, fn_scores;  // (-score, bit): ties -> lower id
    Observation trial = exp.s_next;
    for (int bit = 0; bit < node_bits; ++bit) {
        trial[bit] ^= 1;
        const double s = model_score(model, trial, a_opt, cfg.policy_head);
        trial[bit] ^= 1;
        if (cfg.strict_improvement && s <= base) continue;
        (exp.s_next[bit] ? fp_scores : fn_scores).emplace_back(-s, bit);
    }
    auto keep_best = [&](std::vector<std::pair<double, int>>& scores) {
        std::sort(scores.begin(), scores.end());
        std::vector<int> kept;
        for (size_t i = 0; i < scores.size() && static_cast<int>(kept.size()) < cfg.limit_estimate;
             ++i)
            kept.push_back(scores[i].second);
        return kept;
    };
    Experience corrected = exp;
    for (int bit : keep_best(fp_scores)) corrected.s_next[bit] = 0;
    for (int bit : keep_best(fn_scores)) corrected.s_next[bit] = 1;

    if (ctx && cfg.recompute_reward && corrected.s_next != exp.s_next)
        corrected.r = perceived_reward(corrected, *ctx);

    if (cfg.keep == KeepPolicy::KeepBoth && corrected.s_next != exp.s_next)
        return {exp, corrected};
    return {corrected};
}

InterceptorFactory make_defence_interceptor(DefenceConfig cfg) {
    return [cfg](const Mlp* live_net) -> Interceptor {
        return [cfg, live_net](const Experience& e, const StepContext& ctx) {
            return invert(e, cfg, *live_net, ctx.topo->node_count(), &ctx);
        };
    };
}

}  // namespace netdef
