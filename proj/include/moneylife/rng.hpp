#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace moneylife {

// Seedable generator shared by every stochastic choice in a run. Bounded draws
// use rejection on raw 64-bit output so trajectories do not depend on the
// standard library's distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
        std::uint64_t r = engine_();
        while (r > limit) r = engine_();
        return r % bound;
    }

    // Uniform real in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::mt19937_64& engine() { return engine_; }

    std::string serialize() const;
    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace moneylife
