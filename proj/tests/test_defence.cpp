#include <doctest.h>

#include <cmath>

#include "netdef/adversary.hpp"
#include "netdef/defence.hpp"

using namespace netdef;

namespace {

Topology line5() {
    return load_topology(R"({"version":1,"nodes":[0,1,2,3,4],
        "links":[[0,1],[1,2],[2,3],[3,4]],
        "critical":[0],"migration_targets":[],"initial_compromised":[4],
        "observable_nodes":[0,1,2,3,4],"observable_links":[0,1,2,3]})");
}

// 9-input linear model; action 0 dominates so scores are row-0 dot products
Mlp linear_model(const std::vector<double>& w) {
    Mlp m;
    m.layer_sizes = {9, 2};
    m.weights = {w};
    m.weights[0].insert(m.weights[0].end(), 9, 0.0);
    m.biases = {{100.0, 0.0}};
    return m;
}

}  // namespace

TEST_CASE("invert: clean observation under strict improvement is untouched") {
    // set bits carry positive weight, clear bits negative: no flip improves
    Mlp m = linear_model({-0.4, -0.1, -0.7, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0});
    Experience e;
    e.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
    e.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    e.r = 0.5;
    DefenceConfig cfg;
    auto out = invert(e, cfg, m, 5);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == e);
}

TEST_CASE("invert: recovers a constructed tampering exactly") {
    // attacker and defender share the model; flips that helped the attacker
    // are precisely the ones whose inversion raises the score again
    Topology t = line5();
    Rng rng(2026);
    int round_trips = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Experience clean;
        clean.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
        clean.s_next.assign(9, 0);
        for (int i = 5; i < 9; ++i) clean.s_next[i] = 1;
        for (int i = 1; i < 5; ++i) clean.s_next[i] = rng.bernoulli(0.5) ? 1 : 0;

        // weight signs keyed to the clean bits: only undoing a flip improves
        std::vector<double> w(9, 0.0);
        for (int i = 0; i < 5; ++i) {
            double mag = 0.1 + rng.uniform01();
            w[i] = clean.s_next[i] ? mag : -mag;
        }
        Mlp m = linear_model(w);
        SurrogateView view{&m, false, {}};

        AttackConfig acfg;
        for (int n : t.nodes) (clean.s_next[n] ? acfg.l_fn : acfg.l_fp).push_back(n);
        acfg.limit = 1 + static_cast<int>(rng.uniform_int(2));
        acfg.recompute_reward = false;
        auto [tampered, rec] = craft_poison(clean, acfg, view, t);
        if (tampered.s_next == clean.s_next) continue;
        ++round_trips;

        DefenceConfig dcfg;
        dcfg.limit_estimate = acfg.limit;
        dcfg.recompute_reward = false;
        auto out = invert(tampered, dcfg, m, 5);
        REQUIRE(out.size() == 1);
        CHECK(out[0].s_next == clean.s_next);
    }
    CHECK(round_trips > 80);  // the construction almost always produces flips
}

TEST_CASE("invert: keeps the highest-gain flips within the budget") {
    // tampered bits 1 and 2 are set but carry negative weight; gains 0.9, 0.2
    Mlp m = linear_model({-0.4, -0.9, -0.2, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0});
    Experience e;
    e.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
    e.s_next = {0, 1, 1, 1, 1, 1, 1, 1, 1};
    DefenceConfig cfg;
    cfg.limit_estimate = 1;
    auto out = invert(e, cfg, m, 5);
    REQUIRE(out.size() == 1);
    CHECK(out[0].s_next == Observation{0, 0, 1, 1, 1, 1, 1, 1, 1});
}

TEST_CASE("invert: budget bounds flips per kind and link bits are immutable") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> w(9);
        for (double& v : w) v = rng.uniform_sym(2.0);
        Mlp m = linear_model(w);
        Experience e;
        e.s.assign(9, 0);
        e.s_next.assign(9, 0);
        for (int i = 0; i < 9; ++i) e.s_next[i] = rng.bernoulli(0.5) ? 1 : 0;
        DefenceConfig cfg;
        cfg.limit_estimate = 1 + static_cast<int>(rng.uniform_int(3));
        cfg.strict_improvement = rng.bernoulli(0.5);
        auto out = invert(e, cfg, m, 5);
        const Observation& fixed = out.back().s_next;
        int to_zero = 0, to_one = 0;
        for (int i = 0; i < 9; ++i) {
            if (fixed[i] == e.s_next[i]) continue;
            CHECK(i < 5);
            (e.s_next[i] ? to_zero : to_one) += 1;
        }
        CHECK(to_zero <= cfg.limit_estimate);
        CHECK(to_one <= cfg.limit_estimate);
    }
}

TEST_CASE("invert: without strict improvement the best flips are taken regardless") {
    // every flip lowers the score; strict mode refuses, permissive mode keeps
    // the least-bad one per kind
    Mlp m = linear_model({-0.4, -0.1, -0.7, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0});
    Experience e;
    e.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
    e.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    DefenceConfig cfg;
    cfg.limit_estimate = 1;
    cfg.strict_improvement = false;
    auto out = invert(e, cfg, m, 5);
    REQUIRE(out.size() == 1);
    // FP suspects (set bits 3, 4): clearing bit 3 loses 0.3 < losing 0.6
    CHECK(out[0].s_next[3] == 0);
    CHECK(out[0].s_next[4] == 1);
    // FN suspects (clear bits 0..2): setting bit 1 loses only 0.1
    CHECK(out[0].s_next[1] == 1);
    CHECK(out[0].s_next[0] == 0);
    CHECK(out[0].s_next[2] == 0);
}

TEST_CASE("invert: keep-both emits the incoming experience before the corrected one") {
    Mlp m = linear_model({-0.4, -0.9, -0.2, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0});
    Experience e;
    e.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
    e.s_next = {0, 1, 0, 1, 1, 1, 1, 1, 1};
    DefenceConfig cfg;
    cfg.keep = KeepPolicy::KeepBoth;
    auto out = invert(e, cfg, m, 5);
    REQUIRE(out.size() == 2);
    CHECK(out[0] == e);
    CHECK(out[1].s_next[1] == 0);

    // no correction -> single experience even under keep-both
    Experience clean = e;
    clean.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    auto out2 = invert(clean, cfg, m, 5);
    CHECK(out2.size() == 1);
    CHECK(out2[0] == clean);
}

TEST_CASE("invert: corrected reward is recomputed from the corrected observation") {
    Topology t = line5();
    ActionSpace actions(t);
    RewardParams params{1.0, 1.0, 0.05, 0.1};
    StepContext ctx{&t, &params, &actions, 1, true, 0};

    // bit 3 looks compromised but clearing it raises the score
    Mlp m = linear_model({0.0, 0.0, 0.0, -0.5, 0.6, 0.0, 0.0, 0.0, 0.0});
    Experience e;
    e.s = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    e.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    e.a = actions.encode({ActionKind::NoOp, -1});
    e.r = -123.0;

    SUBCASE("recompute on") {
        DefenceConfig cfg;
        auto out = invert(e, cfg, m, 5, &ctx);
        REQUIRE(out.size() == 1);
        CHECK(out[0].s_next[3] == 0);
        CHECK(out[0].r == perceived_reward(out[0], ctx));
        // node 4 still reads compromised, nothing fresh: 1 - 1/5
        CHECK(out[0].r == doctest::Approx(0.8).epsilon(1e-12));
    }
    SUBCASE("recompute off") {
        DefenceConfig cfg;
        cfg.recompute_reward = false;
        auto out = invert(e, cfg, m, 5, &ctx);
        CHECK(out[0].r == -123.0);
    }
}

TEST_CASE("invert: input validation") {
    Mlp m = linear_model(std::vector<double>(9, 0.0));
    Experience e;
    e.s_next.assign(9, 0);
    DefenceConfig cfg;
    cfg.limit_estimate = 0;
    CHECK_THROWS(invert(e, cfg, m, 5));
    cfg.limit_estimate = 1;
    e.s_next.assign(4, 0);
    CHECK_THROWS(invert(e, cfg, m, 5));
}

TEST_CASE("defence interceptor: wired to the live net and the step context") {
    Topology t = line5();
    ActionSpace actions(t);
    RewardParams params{1.0, 1.0, 0.05, 0.1};
    StepContext ctx{&t, &params, &actions, 1, true, 0};

    Mlp live = linear_model({0.0, 0.0, 0.0, -0.5, 0.6, 0.0, 0.0, 0.0, 0.0});
    DefenceConfig cfg;
    Interceptor ic = make_defence_interceptor(cfg)(&live);

    Experience e;
    e.s = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    e.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    e.a = actions.encode({ActionKind::NoOp, -1});
    auto out = ic(e, ctx);
    REQUIRE(out.size() == 1);
    CHECK(out[0].s_next[3] == 0);
}

TEST_CASE("attack then defence in one pipeline: end-to-end inversion") {
    // shared linear model, attacker limited to the same budget the defender
    // assumes: the composition is the identity on the clean experience
    Topology t = line5();
    ActionSpace actions(t);
    RewardParams params{1.0, 1.0, 0.05, 0.1};
    StepContext ctx{&t, &params, &actions, 1, true, 0};

    Mlp m = linear_model({-0.4, -0.3, -0.6, 0.3, 0.6, 0.0, 0.0, 0.0, 0.0});
    SurrogateView view{&m, false, {}};
    AttackConfig acfg;
    acfg.l_fp = {0, 1, 2};
    acfg.l_fn = {3, 4};
    acfg.limit = 2;
    DefenceConfig dcfg;
    dcfg.limit_estimate = 2;

    Interceptor attack = make_attack_interceptor(acfg, view, t)(&m);
    Interceptor defend = make_defence_interceptor(dcfg)(&m);

    Experience clean;
    clean.s = {0, 0, 0, 0, 1, 1, 1, 1, 1};
    clean.s_next = {0, 0, 0, 1, 1, 1, 1, 1, 1};
    clean.a = actions.encode({ActionKind::NoOp, -1});
    clean.r = 0.55;

    auto attacked = attack(clean, ctx);
    REQUIRE(attacked.size() == 1);
    CHECK(attacked[0].s_next != clean.s_next);
    auto restored = defend(attacked[0], ctx);
    REQUIRE(restored.size() == 1);
    CHECK(restored[0].s_next == clean.s_next);
    CHECK(restored[0].r == doctest::Approx(perceived_reward(restored[0], ctx)).epsilon(1e-12));
}
