#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <string>

namespace odice {

// All stochastic components draw from mt19937_64 engines seeded through
// substream(); the engine sequence is pinned by the standard, so runs are
// reproducible across builds on the same stdlib.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent engine for component `tag` from one user-level seed.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(tag)));
}

// Uniform double in [0, 1) with exactly 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
        std::uint64_t r = gen();
        if (r >= threshold) return r % n;
    }
}

// Shortest round-trip decimal form; shared by every CSV/JSON writer so that
// identical runs serialize byte-identically.
inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_int(long long v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace odice
