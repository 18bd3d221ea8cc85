#pragma once

#include <cstdint>
#include <string_view>

namespace stackstab {

/// Identifier of the pseudo-random generator contract. Reports echo it so that
/// results can be reproduced by an independent implementation.
inline constexpr std::string_view kRngContract = "splitmix64-counter/v1";

/// Master seed. Every random draw in the library is a pure function of a Seed
/// and a (tag, index) path derived from it.
struct Seed {
    std::uint64_t value = 0;

    friend bool operator==(Seed, Seed) = default;
};

/// Seed of a named child stream: pure function of (parent, tag, index).
Seed derive(Seed parent, std::string_view tag, std::uint64_t index = 0) noexcept;

/// Counter-based stream. The k-th output is mix64(key + (k + 1) * golden_gamma),
/// i.e. SplitMix64 read as a counter generator, so a stream never depends on the
/// order in which other streams were consumed.
class RandomStream {
public:
    explicit RandomStream(Seed seed) noexcept : key_(seed.value) {}

    std::uint64_t next_u64() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Unbiased uniform integer in [0, n). Requires n > 0.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;

    /// Standard normal deviate (Box-Muller, second value cached).
    double normal() noexcept;

    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Convenience: the stream of derive(master, tag, index).
inline RandomStream substream(Seed master, std::string_view tag, std::uint64_t index = 0) noexcept {
    return RandomStream(derive(master, tag, index));
}

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace stackstab
