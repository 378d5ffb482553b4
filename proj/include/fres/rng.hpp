#pragma once

#include <cstdint>
#include <random>

namespace fres {

// Every random draw in the project goes through an explicitly seeded engine.
// Sub-streams are derived with a splitmix-style hash so that independent
// consumers (task sampling, search, agent init, ...) never share state and a
// run is reproducible from a single master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

} // namespace fres
