#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace covalue::rng {

// splitmix64, the de-facto standard 64-bit finalizer.  Used to derive
// independent engine seeds from (base seed, purpose label, indices) so
// that every parallel unit owns its own deterministic stream and results
// do not depend on thread count or execution order.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix(std::uint64_t key) { return splitmix64(key); }

template <typename... Rest>
constexpr std::uint64_t mix(std::uint64_t key, std::uint64_t head, Rest... rest) {
    return mix(splitmix64(key ^ splitmix64(head)), static_cast<std::uint64_t>(rest)...);
}

// Derivation key for a named random stream.  The label keeps streams for
// different purposes (noise draws, permutation batches, data generation)
// disjoint even when their numeric indices collide.
template <typename... Idx>
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view label, Idx... idx) {
    return mix(seed ^ fnv1a(label), static_cast<std::uint64_t>(idx)...);
}

inline std::mt19937_64 engine(std::uint64_t key) { return std::mt19937_64(key); }

template <typename... Idx>
std::mt19937_64 engine(std::uint64_t seed, std::string_view label, Idx... idx) {
    return std::mt19937_64(stream_key(seed, label, idx...));
}

// One standard-normal draw from a throwaway engine.  Used where a value
// must be addressable by index (party p, row j) independent of how many
// other draws happened before it.
template <typename... Idx>
double normal_at(std::uint64_t seed, std::string_view label, Idx... idx) {
    auto eng = engine(seed, label, idx...);
    std::normal_distribution<double> dist;
    return dist(eng);
}

}  // namespace covalue::rng
