#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace hamp {

// Deterministic RNG wrapper. The normal sampler is an explicit Box-Muller
// transform over mt19937_64 uniforms rather than std::normal_distribution,
// whose output sequence is implementation-defined; trajectories must be
// reproducible from the seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

    // Standard normal via Box-Muller. The second variate of each pair is
    // cached so consecutive calls consume uniforms at a fixed rate.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
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
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a; used to derive independent named substreams from one run seed so
// parameter initialization does not depend on construction order.
inline std::uint64_t hash64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = hash64(name);
    // splitmix64 finalizer over the combination.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace hamp
