#include "netdef/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <json.hpp>

namespace netdef {

using nlohmann::json;

Mlp Mlp::create(std::vector<int> sizes, Rng& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output layers");
    Mlp m;
    m.layer_sizes = std::move(sizes);
    for (size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const int in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::vector<double> w(static_cast<size_t>(in) * out);
        for (double& x : w) x = rng.uniform_sym(bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    Cache cache;
    return forward(x, cache);
}

std::vector<double> Mlp::forward(std::span<const double> x, Cache& cache) const {
    if (static_cast<int>(x.size()) != input_size())
        throw std::invalid_argument("forward: input size mismatch");
    cache.activations.clear();
    cache.activations.emplace_back(x.begin(), x.end());
    std::vector<double> cur(x.begin(), x.end());
    for (int l = 0; l < layer_count(); ++l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        std::vector<double> next(out);
        const double* w = weights[l].data();
        for (int o = 0; o < out; ++o) {
            double acc = biases[l][o];
            const double* row = w + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
            next[o] = acc;
        }
        if (l + 1 < layer_count())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        cache.activations.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> Mlp::forward_bits(std::span<const uint8_t> bits) const {
    std::vector<double> x(bits.size());
    for (size_t i = 0; i < bits.size(); ++i) x[i] = static_cast<double>(bits[i]);
    return forward(x);
}

Mlp::Grads Mlp::Grads::zeros_like(const Mlp& m) {
    Grads g;
    for (int l = 0; l < m.layer_count(); ++l) {
        g.w.emplace_back(m.weights[l].size(), 0.0);
        g.b.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
}

void Mlp::Grads::accumulate(const Grads& other) {
    for (size_t l = 0; l < w.size(); ++l) {
        for (size_t i = 0; i < w[l].size(); ++i) w[l][i] += other.w[l][i];
        for (size_t i = 0; i < b[l].size(); ++i) b[l][i] += other.b[l][i];
    }
}

void Mlp::Grads::scale(double s) {
    for (auto& layer : w)
        for (double& x : layer) x *= s;
    for (auto& layer : b)
        for (double& x : layer) x *= s;
}

Mlp::Grads Mlp::backward(const Cache& cache, std::span<const double> dloss_doutput) const {
    if (static_cast<int>(dloss_doutput.size()) != output_size())
        throw std::invalid_argument("backward: upstream gradient size mismatch");
    Grads g = Grads::zeros_like(*this);
    std::vector<double> delta(dloss_doutput.begin(), dloss_doutput.end());
    for (int l = layer_count() - 1; l >= 0; --l) {
        const int in = layer_sizes[l], out = layer_sizes[l + 1];
        const auto& input = cache.activations[l];
        if (l < layer_count() - 1) {
            // rectifier derivative at the post-activation cache
            const auto& act = cache.activations[l + 1];
            for (int o = 0; o < out; ++o)
                if (act[o] <= 0.0) delta[o] = 0.0;
        }
        for (int o = 0; o < out; ++o) {
            g.b[l][o] = delta[o];
            double* row = g.w[l].data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) row[i] = delta[o] * input[i];
        }
        if (l > 0) {
            std::vector<double> prev(in, 0.0);
            const double* w = weights[l].data();
            for (int o = 0; o < out; ++o) {
                const double* row = w + static_cast<size_t>(o) * in;
                for (int i = 0; i < in; ++i) prev[i] += delta[o] * row[i];
            }
            delta = std::move(prev);
        }
    }
    return g;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

void Adam::init(const Mlp& model) {
    step = 0;
    m_w.clear(); v_w.clear(); m_b.clear(); v_b.clear();
    for (int l = 0; l < model.layer_count(); ++l) {
        m_w.emplace_back(model.weights[l].size(), 0.0);
        v_w.emplace_back(model.weights[l].size(), 0.0);
        m_b.emplace_back(model.biases[l].size(), 0.0);
        v_b.emplace_back(model.biases[l].size(), 0.0);
    }
}

void Adam::apply(Mlp& model, const Mlp::Grads& grads) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    };
    for (int l = 0; l < model.layer_count(); ++l) {
        update(model.weights[l], grads.w[l], m_w[l], v_w[l]);
        update(model.biases[l], grads.b[l], m_b[l], v_b[l]);
    }
}

std::string save_model(const Mlp& m, const Adam* opt) {
    json j;
    j["version"] = 1;
    j["layer_sizes"] = m.layer_sizes;
    j["weights"] = m.weights;
    j["biases"] = m.biases;
    if (opt) {
        json o;
        o["lr"] = opt->lr;
        o["beta1"] = opt->beta1;
        o["beta2"] = opt->beta2;
        o["eps"] = opt->eps;
        o["step"] = opt->step;
        o["m_w"] = opt->m_w;
        o["v_w"] = opt->v_w;
        o["m_b"] = opt->m_b;
        o["v_b"] = opt->v_b;
        j["optimizer"] = o;
    }
    return j.dump() + "\n";
}

Mlp load_model(const std::string& text, Adam* opt) {
    json j = json::parse(text);
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
    Mlp m;
    m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (opt) {
        if (!j.contains("optimizer")) throw std::runtime_error("checkpoint has no optimizer state");
        const json& o = j.at("optimizer");
        opt->lr = o.at("lr").get<double>();
        opt->beta1 = o.at("beta1").get<double>();
        opt->beta2 = o.at("beta2").get<double>();
        opt->eps = o.at("eps").get<double>();
        opt->step = o.at("step").get<long>();
        opt->m_w = o.at("m_w").get<std::vector<std::vector<double>>>();
        opt->v_w = o.at("v_w").get<std::vector<std::vector<double>>>();
        opt->m_b = o.at("m_b").get<std::vector<std::vector<double>>>();
        opt->v_b = o.at("v_b").get<std::vector<std::vector<double>>>();
    }
    return m;
}

}  // namespace netdef
