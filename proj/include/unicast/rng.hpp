#pragma once

#include <cstdint>
#include <string_view>

namespace unicast {

// Deterministic counter-based generator (SplitMix64). The state advances by a
// fixed odd increment per draw, and each output is a finalizer hash of the
// state, so the sequence is a pure function of (seed, draw index) and is
// identical across platforms that share IEEE-754 doubles.
//
// Stream splitting: split(label) derives a child seed by hashing the label
// (FNV-1a) into the *construction* seed, independent of how many draws the
// parent has made. One root seed therefore reproduces an entire experiment
// tree regardless of evaluation order.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_uniform();
    double next_uniform(double lo, double hi);

    // Zero-mean normal via Box-Muller (two uniform draws per sample, no
    // cached spare, so draw positions stay easy to reason about).
    double next_gaussian(double sigma);

    // Uniform integer in [0, n). Uses 64-bit modulo; the bias is below
    // n / 2^64 and irrelevant at the scales used here.
    uint64_t next_below(uint64_t n);

    // Child stream keyed by a purpose label, derived from the construction
    // seed. Split order and parent draw position do not affect the child.
    Rng split(std::string_view label) const;

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(T& v) {
        if (v.size() < 2) return;
        for (size_t i = v.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(next_below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    uint64_t seed_;
    uint64_t state_;
};

// SplitMix64 finalizer; also used on its own to mix label hashes into seeds.
uint64_t mix64(uint64_t x);

uint64_t fnv1a64(std::string_view s);

} // namespace unicast
