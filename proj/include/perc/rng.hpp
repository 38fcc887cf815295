#pragma once

#include <cmath>
#include <cstdint>

namespace perc {

// Counter-based pseudorandom function: the value at any coordinate is a pure
// function of (seed, coordinates), so lattice states can be queried lazily and
// in any order without sequential generation.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t hash2(std::uint64_t seed, std::uint64_t a) {
    return mix64(seed ^ 0x8824a0cc3bd61555ull ^ mix64(a));
}

inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(seed ^ 0xd1342543de82ef95ull ^ mix64(a)) + b);
}

// Derive an independent stream seed; `tag` separates usages (env vs noise vs replica).
inline std::uint64_t derive(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return mix64(mix64(master ^ mix64(tag)) + index);
}

// Threshold such that (hash < threshold) has probability p (up to the double
// rounding of p itself). Monotone in p, which the coupling arguments rely on.
inline std::uint64_t threshold_for(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return ~0ull;
    long double t = std::floor((long double)p * 18446744073709551616.0L);
    if (t >= 18446744073709551615.0L) return ~0ull;
    return (std::uint64_t)t;
}

inline double to_unit(std::uint64_t u) {
    return (double)(u >> 11) * 0x1.0p-53;
}

}  // namespace rng
}  // namespace perc
