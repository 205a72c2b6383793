#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qkr {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream seed for (root, ids...): each id is folded in with one splitmix64
// round, so a cell's stream depends only on its coordinates, never on the
// order in which cells are scheduled.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = splitmix64(root);
    for (auto id : ids) s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return s;
}

}  // namespace qkr
