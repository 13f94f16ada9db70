#pragma once

// Deterministic stream splitting: every parallel unit of work (resample, speaker,
// repeat) seeds its own engine from (seed, stream ids) so results do not depend on
// scheduling or thread count.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace phonoscope {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids = {}) {
    return Rng(stream_seed(seed, ids));
}

// Unbiased integer in [0, bound).
inline std::size_t uniform_index(Rng& rng, std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
}

template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
    std::shuffle(values.begin(), values.end(), rng);
}

} // namespace phonoscope
