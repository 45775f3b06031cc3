#pragma once

#include <cmath>
#include <cstdint>

namespace shadowad {

// SplitMix64: the state walks the golden-ratio sequence and each output is a
// Stafford-finalized copy of the state.  Small, fast, and — the property we
// depend on — trivially splittable: derive_seed(seed, i) is a pure function,
// so per-index child streams can be created in any order (or in parallel)
// and still produce identical bytes.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Inclusive range; span must be small enough that double indexing is exact.
    int uniform_int(int lo, int hi) {
        int span = hi - lo + 1;
        int k = static_cast<int>(next_double() * span);
        return lo + (k < span ? k : span - 1);
    }

    // Standard normal via Box-Muller; always consumes exactly two draws.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        // Guard the log: shift u1 into (0, 1].
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

  private:
    std::uint64_t state_;
};

// Seed of the index-th child stream of a root seed.  Equals the (index+1)-th
// raw output of SplitMix64(seed), making children independent of each other
// and of the parent's consumption history.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace shadowad
