#pragma once

#include <cstdint>

namespace cte {

/// Counter-based uniform stream. Output i is a pure function of (key, i),
/// so replication r of a Monte Carlo run only needs child(master_seed, r).
class UniformStream {
public:
    explicit UniformStream(std::uint64_t key) noexcept : key_(mix(key)) {}

    /// Independent sub-stream for replication `index`.
    static UniformStream child(std::uint64_t master_seed, std::uint64_t index) noexcept {
        return UniformStream(master_seed ^ mix(index + kGolden));
    }

    std::uint64_t next_u64() noexcept { return mix(key_ + (++counter_) * kGolden); }

    /// Uniform on the open interval (0, 1): 53-bit grid shifted by half a step.
    double next_open01() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

    // SplitMix64 finalizer.
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace cte
