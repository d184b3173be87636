#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace scaleup {

// All randomness in a run flows from one 64-bit seed. Independent streams are
// derived by folding a path of integer ids into the seed with SplitMix64
// rounds; the resulting key seeds a std::mt19937_64. Documented so runs are
// reproducible and segments can be simulated in any order.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = splitmix64(seed);
    for (std::uint64_t id : path) key = splitmix64(key ^ id);
    return std::mt19937_64(key);
}

// Uniform double in [0, 1) with 53 random bits; avoids the
// implementation-defined std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Binomial(trials, p) as a Bernoulli sum; trials stays small (at most the
// server capacity) so this is both portable and fast enough.
inline int binomial_sample(std::mt19937_64& rng, int trials, double p) {
    int k = 0;
    for (int i = 0; i < trials; ++i)
        if (uniform01(rng) < p) ++k;
    return k;
}

}  // namespace scaleup
