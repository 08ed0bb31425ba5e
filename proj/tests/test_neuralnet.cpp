#include <doctest.h>

#include <cmath>
#include <numeric>

#include "netdef/neuralnet.hpp"

using namespace netdef;

namespace {

// 2-3-2 net with fixed weights, small enough to unroll by hand below
Mlp tiny_net() {
    Mlp m;
    m.layer_sizes = {2, 3, 2};
    m.weights = {{0.5, -0.3,
                  0.2, 0.8,
                  -0.6, 0.1},
                 {1.0, -1.0, 0.5,
                  0.3, 0.7, -0.2}};
    m.biases = {{0.1, -0.2, 0.05}, {0.0, 0.25}};
    return m;
}

double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace

TEST_CASE("forward: hand-unrolled 2-3-2 case") {
    Mlp m = tiny_net();
    // x = (1, 2)
    // pre-hidden: (0.5*1 - 0.3*2 + 0.1,  0.2*1 + 0.8*2 - 0.2,  -0.6*1 + 0.1*2 + 0.05)
    //           = (0.0, 1.6, -0.35) -> relu -> (0.0, 1.6, 0.0)
    // out: (1.0*0 - 1.0*1.6 + 0.5*0 + 0.0,  0.3*0 + 0.7*1.6 - 0.2*0 + 0.25)
    //    = (-1.6, 1.37)
    auto y = m.forward(std::vector<double>{1.0, 2.0});
    REQUIRE(y.size() == 2);
    CHECK(y[0] == doctest::Approx(-1.6).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(1.37).epsilon(1e-12));
}

TEST_CASE("forward: cache holds input and post-activations") {
    Mlp m = tiny_net();
    Mlp::Cache cache;
    auto y = m.forward(std::vector<double>{1.0, 2.0}, cache);
    REQUIRE(cache.activations.size() == 3);
    CHECK(cache.activations[0] == std::vector<double>{1.0, 2.0});
    CHECK(cache.activations[1][0] == doctest::Approx(0.0));
    CHECK(cache.activations[1][1] == doctest::Approx(1.6));
    CHECK(cache.activations[1][2] == doctest::Approx(0.0));
    CHECK(cache.activations[2] == y);
}

TEST_CASE("forward_bits matches forward on the 0/1 promotion") {
    Rng rng(3);
    Mlp m = Mlp::create({6, 8, 4}, rng);
    std::vector<uint8_t> bits = {1, 0, 1, 1, 0, 1};
    std::vector<double> x(bits.begin(), bits.end());
    CHECK(m.forward_bits(bits) == m.forward(x));
}

TEST_CASE("backward: gradients match central finite differences") {
    Rng rng(42);
    // biased inputs keep pre-activations away from the rectifier kink
    for (int trial = 0; trial < 5; ++trial) {
        Mlp m = Mlp::create({5, 16, 16, 3}, rng);
        std::vector<double> x(5), dl(3);
        for (double& v : x) v = rng.uniform_sym(1.0) + 0.1;
        for (double& v : dl) v = rng.uniform_sym(1.0);

        auto loss = [&](const Mlp& net) {
            auto y = net.forward(x);
            return std::inner_product(y.begin(), y.end(), dl.begin(), 0.0);
        };

        Mlp::Cache cache;
        m.forward(x, cache);
        Mlp::Grads g = m.backward(cache, dl);

        const double h = 1e-5;
        double worst = 0.0;
        for (int layer = 0; layer < m.layer_count(); ++layer) {
            for (size_t i = 0; i < m.weights[layer].size(); i += 7) {
                Mlp plus = m, minus = m;
                plus.weights[layer][i] += h;
                minus.weights[layer][i] -= h;
                double fd = (loss(plus) - loss(minus)) / (2 * h);
                worst = std::max(worst, rel_err(fd, g.w[layer][i]));
            }
            for (size_t i = 0; i < m.biases[layer].size(); i += 3) {
                Mlp plus = m, minus = m;
                plus.biases[layer][i] += h;
                minus.biases[layer][i] -= h;
                double fd = (loss(plus) - loss(minus)) / (2 * h);
                worst = std::max(worst, rel_err(fd, g.b[layer][i]));
            }
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("backward: dead rectifier units pass no gradient") {
    Mlp m = tiny_net();
    Mlp::Cache cache;
    m.forward(std::vector<double>{1.0, 2.0}, cache);  // hidden unit 2 is at -0.35
    Mlp::Grads g = m.backward(cache, std::vector<double>{1.0, 1.0});
    // weights into the dead unit get zero gradient
    CHECK(g.w[0][4] == 0.0);
    CHECK(g.w[0][5] == 0.0);
    CHECK(g.b[0][2] == 0.0);
}

TEST_CASE("grads: zeros_like/accumulate/scale algebra") {
    Mlp m = tiny_net();
    Mlp::Grads g = Mlp::Grads::zeros_like(m);
    for (auto& layer : g.w)
        for (double v : layer) CHECK(v == 0.0);
    g.w[0][0] = 2.0;
    g.b[1][1] = -4.0;
    Mlp::Grads h = Mlp::Grads::zeros_like(m);
    h.w[0][0] = 1.0;
    g.accumulate(h);
    g.scale(0.5);
    CHECK(g.w[0][0] == 1.5);
    CHECK(g.b[1][1] == -2.0);
}

TEST_CASE("softmax: sums to one and is shift-invariant at extreme logits") {
    SUBCASE("plain values") {
        auto p = softmax(std::vector<double>{1.0, 2.0, 3.0});
        double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
        CHECK(p[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
        CHECK(p[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
    }
    SUBCASE("huge logits stay finite") {
        auto p = softmax(std::vector<double>{1e4, 1e4 - 1.0, -1e4});
        CHECK(std::isfinite(p[0]));
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
        CHECK(p[2] == doctest::Approx(0.0));
    }
    SUBCASE("uniform on equal logits") {
        auto p = softmax(std::vector<double>{7.0, 7.0, 7.0, 7.0});
        for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("adam: drives a convex quadratic to its minimum") {
    // single linear layer, loss = sum (w_i - t_i)^2; gradient 2(w - t)
    Mlp m;
    m.layer_sizes = {1, 3};
    m.weights = {{0.0, 0.0, 0.0}};
    m.biases = {{0.0, 0.0, 0.0}};
    std::vector<double> target = {0.3, -0.7, 1.1};

    Adam opt;
    opt.lr = 0.05;
    opt.init(m);
    for (int step = 0; step < 500; ++step) {
        Mlp::Grads g = Mlp::Grads::zeros_like(m);
        for (int i = 0; i < 3; ++i) g.w[0][i] = 2.0 * (m.weights[0][i] - target[i]);
        opt.apply(m, g);
    }
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(m.weights[0][i] - target[i]) < 1e-3);
}

TEST_CASE("adam: first step moves by roughly lr against the gradient sign") {
    Mlp m = tiny_net();
    double before = m.weights[0][0];
    Adam opt;
    opt.lr = 0.01;
    opt.init(m);
    Mlp::Grads g = Mlp::Grads::zeros_like(m);
    g.w[0][0] = 5.0;
    opt.apply(m, g);
    // bias-corrected first step is lr * g / (|g| + eps) ~= lr
    CHECK(m.weights[0][0] == doctest::Approx(before - 0.01).epsilon(1e-6));
}

TEST_CASE("save/load: bit-identical round trip") {
    Rng rng(17);
    Mlp m = Mlp::create({10, 32, 32, 7}, rng);
    // denormal-ish and negative-zero values survive the trip too
    m.weights[0][0] = -0.0;
    m.weights[0][1] = 1e-300;
    Mlp back = load_model(save_model(m));
    CHECK(back == m);
    CHECK(save_model(back) == save_model(m));

    std::vector<double> x(10);
    for (double& v : x) v = rng.uniform_sym(2.0);
    CHECK(back.forward(x) == m.forward(x));
}

TEST_CASE("save/load: optimizer state round trip") {
    Rng rng(23);
    Mlp m = Mlp::create({4, 8, 2}, rng);
    Adam opt;
    opt.lr = 0.003;
    opt.init(m);
    for (int i = 0; i < 3; ++i) {
        Mlp::Grads g = Mlp::Grads::zeros_like(m);
        g.w[0][1] = 1.0;
        g.b[1][0] = -2.0;
        opt.apply(m, g);
    }
    Adam back_opt;
    Mlp back = load_model(save_model(m, &opt), &back_opt);
    CHECK(back == m);
    CHECK(back_opt.step == opt.step);
    CHECK(back_opt.m_w == opt.m_w);
    CHECK(back_opt.v_w == opt.v_w);
    CHECK(back_opt.m_b == opt.m_b);
    CHECK(back_opt.v_b == opt.v_b);

    // identical continued updates from either copy
    Mlp::Grads g = Mlp::Grads::zeros_like(m);
    g.w[1][3] = 0.7;
    opt.apply(m, g);
    back_opt.apply(back, g);
    CHECK(back == m);
}

TEST_CASE("create: deterministic and fan-in bounded") {
    Rng a(5), b(5);
    Mlp m1 = Mlp::create({8, 16, 4}, a);
    Mlp m2 = Mlp::create({8, 16, 4}, b);
    CHECK(m1 == m2);
    for (int layer = 0; layer < m1.layer_count(); ++layer) {
        double bound = 1.0 / std::sqrt(m1.layer_sizes[layer]);
        for (double w : m1.weights[layer]) CHECK(std::abs(w) <= bound);
    }
}

TEST_CASE("load: malformed input throws") {
    CHECK_THROWS(load_model("not json"));
    CHECK_THROWS(load_model("{}"));
    CHECK_THROWS(load_model(R"({"layer_sizes":[2,2],"weights":[[1,2,3]],"biases":[[0,0]]})"));
}
