#ifndef SCPROJ_RNG_HPP
#define SCPROJ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace scproj {

/**
 * @brief Deterministic random source with pinned distributions.
 *
 * Standard-library distributions are implementation-defined, so every draw
 * here is derived from the raw mt19937_64 stream with fixed arithmetic.
 * Identical seeds give identical sequences on any conforming platform.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /** Uniform in [0, 1) with 53 bits of mantissa. */
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /** Standard normal via Box-Muller; the paired draw is cached. */
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] keeps the log finite.
        double u1 = 1.0 - uniform01();
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /** Unbiased integer in [0, n) via rejection sampling; n must be > 0. */
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw = next();
        while (draw >= limit) draw = next();
        return draw % n;
    }

    /** Fisher-Yates shuffle driven by below(). */
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /** Derives an independent stream seed from a base seed and a tag. */
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace scproj

#endif
