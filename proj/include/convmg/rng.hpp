#pragma once

#include <cstdint>
#include <random>

#include "convmg/field.hpp"

namespace convmg {

/// splitmix64 step; used to derive independent seeds from a base seed so
/// that per-step and per-chain streams are reproducible.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

/// Fills a field with i.i.d. +-1 entries. Avoids std distributions so the
/// stream is identical across standard library implementations.
inline void fill_rademacher(GridField& f, std::mt19937_64& eng) {
    double* v = f.data();
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) v[i] = (eng() & 1ULL) ? 1.0 : -1.0;
}

/// Uniform double in [-1, 1); test helper for randomized identities.
inline double uniform_pm1(std::mt19937_64& eng) {
    return 2.0 * (double(eng() >> 11) * 0x1.0p-53) - 1.0;
}

inline void fill_uniform(GridField& f, std::mt19937_64& eng) {
    double* v = f.data();
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) v[i] = uniform_pm1(eng);
}

}  // namespace convmg
