#pragma once

#include <span>
#include <string>
#include <vector>

#include "netdef/rng.hpp"

namespace netdef {

// Dense MLP with rectifier hidden units and a linear output layer.
// Q heads read the outputs directly; policy heads apply softmax on top.
struct Mlp {
    std::vector<int> layer_sizes;               // [in, hidden..., out]
    std::vector<std::vector<double>> weights;   // per layer, row-major out x in
    std::vector<std::vector<double>> biases;    // per layer

    static Mlp create(std::vector<int> sizes, Rng& rng);  // fan-in-scaled uniform init

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }

    std::vector<double> forward(std::span<const double> x) const;

    struct Cache {
        std::vector<std::vector<double>> activations;  // [0]=input, per-layer post-activation
    };
    std::vector<double> forward(std::span<const double> x, Cache& cache) const;

    struct Grads {
        std::vector<std::vector<double>> w, b;
        static Grads zeros_like(const Mlp& m);
        void accumulate(const Grads& other);
        void scale(double s);
    };
    // exact reverse-mode gradients for upstream d(loss)/d(outputs)
    Grads backward(const Cache& cache, std::span<const double> dloss_doutput) const;

    std::vector<double> forward_bits(std::span<const uint8_t> bits) const;

    bool operator==(const Mlp&) const = default;
};

std::vector<double> softmax(std::span<const double> logits);

struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

    void init(const Mlp& model);
    void apply(Mlp& model, const Mlp::Grads& grads);
};

std::string save_model(const Mlp& m, const Adam* opt = nullptr);
Mlp load_model(const std::string& text, Adam* opt = nullptr);

}  // namespace netdef
