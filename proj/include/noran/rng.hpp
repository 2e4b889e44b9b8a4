#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace noran {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Every subsystem draws from its own stream derived from the master seed and
// a tag, so adding draws in one place never shifts another.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
    return splitmix64(master ^ splitmix64(fnv1a(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    return splitmix64(master ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::string_view tag) {
    return Rng(derive_seed(master, tag));
}

// Uniform integer in [0, n) without relying on the implementation-defined
// std::uniform_int_distribution algorithm.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace noran
