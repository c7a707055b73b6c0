#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <istream>
#include <ostream>

namespace geovae {

/// Deterministic xoshiro256++ generator. We own the bit stream end to end so
/// that seeded runs produce byte-identical artifacts regardless of the
/// standard library's distribution internals.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) { reseed(seed); }

    void reseed(std::uint64_t seed)
    {
        // splitmix64 expansion of the seed into the full state
        std::uint64_t x = seed;
        for (auto &word : state_) {
            x += 0x9e3779b97f4a7c15ull;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t operator()()
    {
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

    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ull; }

    /// uniform double in [0, 1)
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// uniform double in [a, b)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// standard normal via Box-Muller (no cached spare: call order stays
    /// trivially reproducible)
    double normal()
    {
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * M_PI * u2);
    }

    /// Marsaglia-Tsang gamma sampler, shape a > 0, unit scale
    double gamma(double a)
    {
        if (a < 1.0) {
            // boost shape by one, then apply the standard power correction
            const double u = uniform();
            return gamma(a + 1.0) * std::pow(u > 0 ? u : 1e-300, 1.0 / a);
        }
        const double d = a - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0)
                continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x)
                return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }

    /// Beta(a, b) via two gammas
    double beta(double a, double b)
    {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

    /// Derive an independent child stream (used to hand each worker its own rng).
    Rng split()
    {
        const std::uint64_t s = (*this)();
        return Rng(s ^ 0xa0761d6478bd642full);
    }

    const std::array<std::uint64_t, 4> &state() const { return state_; }
    void set_state(const std::array<std::uint64_t, 4> &s) { state_ = s; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_ {};
};

} // namespace geovae
