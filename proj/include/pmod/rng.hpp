#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pmod {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded random source. Variate generation is done in-house (no
// std::*_distribution) so that streams are identical across standard
// library implementations and every run is reproducible from its seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n), n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return x % n;
    }

    // Exponential inter-arrival time with the given rate (events per unit).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Independent stream derived from this generator's seed, not its state.
    Rng spawn(std::uint64_t stream) const { return Rng(splitmix64(root_ ^ splitmix64(stream + 1))); }

    std::uint64_t seed() const { return root_; }

private:
    std::uint64_t root_;
    std::mt19937_64 engine_;
};

}  // namespace pmod
