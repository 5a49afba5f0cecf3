#ifndef PPOLICY_RNG_HPP
#define PPOLICY_RNG_HPP

#include <cmath>
#include <cstdint>

namespace ppolicy {

// Counter-based deterministic random stream. A stream is a pure function of
// the key words it was constructed from, so draws for (seed, replicate, month)
// are identical no matter which thread executes them or in what order.
//
// The generator is SplitMix64 over a key-mixed state; statistically adequate
// for bootstrap index draws and Gaussian noise, and exactly reproducible
// across platforms (integer arithmetic only).
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : state_(mix(key ^ 0x9e3779b97f4a7c15ULL)) {}

    RandomStream(std::uint64_t a, std::uint64_t b) : RandomStream(combine(a, b)) {}
    RandomStream(std::uint64_t a, std::uint64_t b, std::uint64_t c)
        : RandomStream(combine(combine(a, b), c)) {}
    RandomStream(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d)
        : RandomStream(combine(combine(combine(a, b), c), d)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Unbiased via rejection on the top bits.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller (explicit, implementation-independent).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
        return mix(a + 0x9e3779b97f4a7c15ULL * (b + 0x165667b19e3779f9ULL));
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ppolicy

#endif
