#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace esprd {

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based random stream keyed on (seed, label, shot, qubit). Each key
// yields an independent deterministic sequence, so shot generation can be
// parallelized in any order and still reproduce bit-identical data.
class ShotStream {
public:
    ShotStream(std::uint64_t seed, std::uint64_t label, std::uint64_t shot, std::uint64_t qubit) {
        state_ = mix64(seed);
        state_ = mix64(state_ ^ (label * 0xd1342543de82ef95ULL));
        state_ = mix64(state_ ^ (shot * 0xaf251af3b0f025b5ULL));
        state_ = mix64(state_ ^ (qubit * 0x9e6c63d0876a9a63ULL));
    }

    explicit ShotStream(std::uint64_t seed) { state_ = mix64(seed); }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the paired draw is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Deterministic Fisher-Yates shuffle of an index vector. std::shuffle is not
// portable across standard library implementations, this is.
template <typename T>
inline void deterministic_shuffle(std::vector<T>& v, std::uint64_t seed) {
    ShotStream rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace esprd
