#ifndef CBN_RNG_HPP
#define CBN_RNG_HPP

#include <cstdint>
#include <random>

namespace cbn {

// std::mt19937_64 is bit-exact across standard libraries, the std
// distributions are not. The two mappings below are fixed so that every
// seeded output is reproducible on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), unbiased (rejection sampling).
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cbn

#endif  // CBN_RNG_HPP
