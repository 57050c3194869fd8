#include "unicast/rng.hpp"

#include <cmath>

namespace unicast {

namespace {
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr double kTwoPi = 6.28318530717958647692;
} // namespace

uint64_t mix64(uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double Rng::next_gaussian(double sigma) {
    double u1 = next_uniform();
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return sigma * r * std::cos(kTwoPi * u2);
}

uint64_t Rng::next_below(uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
}

Rng Rng::split(std::string_view label) const {
    return Rng(mix64(seed_ ^ fnv1a64(label)));
}

} // namespace unicast
