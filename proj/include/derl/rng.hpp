#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace derl {

/// Deterministic counter-seedable generator (splitmix64 core).
///
/// Experiments derive an independent sub-stream per (deployment, trajectory)
/// from a master seed, so results do not depend on sampling order or worker
/// count, and the stdlib's implementation-defined distributions are avoided:
/// every draw is defined here, bit for bit.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Sub-stream addressed by up to three counters under a master seed.
    static Rng substream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) {
        std::uint64_t s = mix(master);
        s = mix(s ^ (0x9e3779b97f4a7c15ULL + a));
        s = mix(s ^ (0xbf58476d1ce4e5b9ULL + b));
        s = mix(s ^ (0x94d049bb133111ebULL + c));
        return Rng(s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    /// Draw an index from an inclusive-prefix-sum row (cdf.back() ~ 1).
    int categorical(const std::vector<double>& cdf) {
        const double u = uniform();
        for (std::size_t i = 0; i + 1 < cdf.size(); ++i)
            if (u < cdf[i]) return static_cast<int>(i);
        return static_cast<int>(cdf.size()) - 1;
    }

    /// Standard normal via Box-Muller (deterministic given stream position).
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace derl
