#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace fsrlab {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Deterministic xoshiro256** generator with named derived streams.
///
/// Streams are derived from the generator's own seed (not its current
/// state), so adding or removing draws in one consumer never shifts the
/// sequences seen by another. All distributions are implemented here
/// rather than pulled from <random> so that sequences are identical
/// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
        if (s_[0] == 0 && s_[1] == 0 && s_[2] == 0 && s_[3] == 0) s_[3] = 1;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform integer in [0, bound). bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    /// Standard normal via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class Vec>
    void shuffle(Vec& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const std::size_t j = std::size_t(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    /// Derive an independent named stream from this generator's seed.
    Rng stream(std::string_view name) const {
        std::uint64_t x = seed_ ^ fnv1a64(name);
        splitmix64(x);
        return Rng(splitmix64(x));
    }
    Rng stream(std::string_view name, std::uint64_t a) const {
        std::uint64_t x = seed_ ^ fnv1a64(name);
        x ^= splitmix64(x) + a;
        return Rng(splitmix64(x));
    }
    Rng stream(std::string_view name, std::uint64_t a, std::uint64_t b) const {
        std::uint64_t x = seed_ ^ fnv1a64(name);
        x ^= splitmix64(x) + a;
        x ^= splitmix64(x) + b;
        return Rng(splitmix64(x));
    }

    std::uint64_t seed() const { return seed_; }
    std::array<std::uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<std::uint64_t, 4>& s) {
        s_ = s;
        has_spare_ = false;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace fsrlab
