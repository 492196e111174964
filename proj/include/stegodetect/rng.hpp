#pragma once

#include <cstdint>

namespace stegodetect {

// Deterministic counter-based generator (splitmix64). Equal seeds produce
// equal draw sequences on every platform: the math path never touches
// platform entropy or libc rand. Not shareable across threads; derive
// independent streams with substream().
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    // Uniform in [0, 1): 53 high bits scaled exactly.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent stream derived from the original seed and a tag; the
    // result does not depend on how many draws this generator has made.
    Rng substream(std::uint64_t tag) const {
        return Rng(mix(seed_ ^ mix(tag + 0x9E3779B97F4A7C15ull)));
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace stegodetect
