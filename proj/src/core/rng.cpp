#include "stackstab/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace stackstab {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kIndexGamma = 0xD1B54A32D192ED03ULL;

std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Seed derive(Seed parent, std::string_view tag, std::uint64_t index) noexcept {
    std::uint64_t h = mix64(parent.value ^ mix64(fnv1a(tag)));
    h = mix64(h + (index + 1) * kIndexGamma);
    return Seed{h};
}

std::uint64_t RandomStream::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
}

double RandomStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::uniform_index(std::uint64_t n) noexcept {
    // Lemire's multiply-and-reject.
    std::uint64_t x = next_u64();
    __uint128_t product = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(product);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = next_u64();
            product = static_cast<__uint128_t>(x) * n;
            low = static_cast<std::uint64_t>(product);
        }
    }
    return static_cast<std::uint64_t>(product >> 64);
}

double RandomStream::normal() noexcept {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_normal_ = true;
    return radius * std::cos(angle);
}

}  // namespace stackstab
