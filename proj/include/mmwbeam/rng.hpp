#pragma once

#include <cstdint>
#include <random>

namespace mmwbeam {

// All stochastic draws go through this engine. mt19937_64 has a fully
// specified output sequence, so a seed pins every experiment.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Named sub-streams. Each consumer of randomness gets its own stream so that
// e.g. adding a policy to an evaluation never perturbs the realizations.
enum class Stream : std::uint64_t {
    realization = 1,
    exploration = 2,
    replay = 3,
    init = 4,
    random_policy = 5,
    train_realization = 6,
};

// Seed for item `index` of `stream` under `master`. Pure function, so
// trial k sees the same draws whatever thread or order it runs in.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return splitmix64(h ^ index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
    return Rng{derive_seed(master, stream, index)};
}

// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace mmwbeam

namespace mmwbeam {

// Unbiased integer in [0, n). n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - Rng::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

} // namespace mmwbeam
