#pragma once

#include <cstdint>
#include <cmath>

namespace dcppo {

// Counter-based splittable generator (splitmix64 core). Streams are keyed,
// so trajectory i of seed s always produces the same draws no matter how
// work is sharded across threads. All sampling goes through uniform01()
// rather than std:: distributions to keep output bitwise stable across
// standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on [2^-53, 1 - 2^-53]; the endpoints are excluded so that
    // log(u) and log(-log(u)) stay finite.
    double uniform01() {
        double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        if (u <= 0.0) u = 0x1.0p-53;
        return u;
    }

    // Standard Gumbel(0,1) via inverse CDF.
    double gumbel() { return -std::log(-std::log(uniform01())); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::uint64_t state_;
};

// Key derivation for substreams (seed, index, tag, ...). 64-bit FNV-1a over
// the arguments followed by an avalanche step.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto absorb = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
    };
    absorb(a);
    absorb(b);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return h;
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_key(mix_key(a, b), c);
}

} // namespace dcppo
