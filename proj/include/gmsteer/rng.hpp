/**
 * @file rng.hpp
 * @brief Deterministic random number generation with counter-derived streams.
 *
 * The generators are implemented explicitly (xoshiro256++ seeded through
 * splitmix64) so that sampled sequences are identical across platforms and
 * standard-library versions. Per-sample streams are derived from a master
 * seed and a stream index, independent of execution order.
 */

#ifndef GMSTEER_RNG_HPP
#define GMSTEER_RNG_HPP

#include <cmath>
#include <cstdint>

namespace gmsteer {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    /// Stream derived from (master seed, stream index); streams with distinct
    /// indices are statistically independent.
    static Rng stream(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t sm = master_seed ^ (0x517cc1b727220a95ULL * (stream_index + 1));
        return Rng(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in (0, 1].
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; deterministic given the stream state.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4] = {};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace gmsteer

#endif
