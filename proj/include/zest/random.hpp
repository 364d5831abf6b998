#pragma once

#include <cstdint>
#include <limits>

namespace zest
{
    /// SplitMix64 finalizer. Bijective on 64-bit words.
    constexpr std::uint64_t mix64(std::uint64_t z) noexcept
    {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Derives a child key from (parent, index). Different indices give
    /// statistically independent streams; the result depends on nothing else.
    constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept
    {
        return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
    }

    /// Counter-based generator: output n is mix64(key + n * gamma).
    /// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
    class CounterRng
    {
    public:
        using result_type = std::uint64_t;

        constexpr explicit CounterRng(std::uint64_t key) noexcept : state_(key) {}

        /// Stream for query `index` of the perturbation family keyed by `seed`.
        static constexpr CounterRng for_query(std::uint64_t seed, std::uint64_t index) noexcept
        {
            return CounterRng(derive_seed(seed, index));
        }

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

        constexpr result_type operator()() noexcept
        {
            state_ += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = state_;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            return z ^ (z >> 31);
        }

    private:
        std::uint64_t state_;
    };
}
