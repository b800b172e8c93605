#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace citynet {

/// Counter-based generator: the stream for (seed, key, counter) is fixed, so
/// draws do not depend on evaluation order or thread schedule.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t key, std::uint64_t counter) {
        std::uint64_t x = seed;
        std::uint64_t h = mix(x);
        x = h ^ key;
        h = mix(x);
        x = h ^ counter;
        state_ = mix(x);
    }

    std::uint64_t next() { return mix(state_); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double normal();

private:
    static std::uint64_t mix(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

inline double CounterRng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace citynet
