#pragma once

#include <cstdint>

namespace scrl {

// Deterministic 64-bit RNG (splitmix64 core). We do not use
// std::uniform_real_distribution because its output is
// implementation-defined; checkpoints and metrics must be
// bit-reproducible across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi] (closed; the endpoint distinction is measure zero).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (one value per call, no caching,
    // to keep the stream position independent of call parity).
    double normal();

    // Derives an independent child stream; used to give each image /
    // worker its own stream so results do not depend on scheduling.
    Rng split(uint64_t key) const;

private:
    uint64_t state_;
};

inline Rng Rng::split(uint64_t key) const {
    uint64_t z = state_ ^ (0x94d049bb133111ebULL * (key + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
}

}  // namespace scrl
