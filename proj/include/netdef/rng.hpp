#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace netdef {

// Deterministic RNG wrapper. All draws go through our own bounded-int /
// uniform-real code paths so that streams are identical across standard
// library implementations (std::uniform_int_distribution is not portable).
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, bound). bound > 0.
    uint64_t uniform_int(uint64_t bound) {
        // modulo-rejection to avoid bias
        const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % bound;
    }

    int uniform_index(int n) { return static_cast<int>(uniform_int(static_cast<uint64_t>(n))); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform in [-half, half).
    double uniform_sym(double half) { return (uniform01() * 2.0 - 1.0) * half; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace netdef
