#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace metacmi {

// splitmix64 output function applied to a single word.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a hash of a stream name, used as a derivation tag.
constexpr std::uint64_t tag(std::string_view name) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/*
 * Sub-seed derivation: h = mix64(master), then h = mix64(h ^ part) for each
 * part in order. Every random quantity in the library is drawn from a
 * SplitMix64 stream seeded by one of these derived values, so results do not
 * depend on evaluation order or thread count.
 */
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t master, Parts... parts) noexcept
{
    std::uint64_t h = mix64(master);
    ((h = mix64(h ^ static_cast<std::uint64_t>(parts))), ...);
    return h;
}

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    bool bit() noexcept { return ((*this)() >> 63) != 0; }

    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound)) % bound;
    }

private:
    std::uint64_t state_;
};

// Inverse-CDF draw from a probability vector using one uniform variate.
std::size_t sample_categorical(std::span<const double> probabilities, double u);

} // namespace metacmi
