#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cqbound/common.hpp"

namespace cqbound {

// mt19937_64 with hand-rolled variate transforms. std::normal_distribution
// and friends differ across standard libraries, which would break the
// byte-identical-output contract; mt19937_64 itself is pinned by the standard.
class Rng {
public:
    Rng() : engine_(std::mt19937_64::default_seed) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derives an independent stream from (seed, tags...), e.g. per trial/node.
    template <class... Tags>
    static Rng stream(std::uint64_t seed, Tags... tags) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(tags)...};
        Rng r;
        r.engine_.seed(seq);
        return r;
    }

    std::uint64_t raw() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw ConfigError("Rng::bounded: empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller, caching the spare draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * kPi * u2);
    }

    VecX normal_vec(Eigen::Index n) {
        VecX v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cqbound
