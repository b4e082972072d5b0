#pragma once

// Counter-based hashing and seed derivation.
//
// Every random quantity in the library is a pure function of a 64-bit key and
// a counter, so stacks and streams can be replayed from any prefix without
// storing them. The derivation convention below is stable across versions:
//
//   mix64(z)             splitmix64 finalizer
//   combine(h, v)        mix64(h ^ (mix64(v) + 0x9e3779b97f4a7c15 + (h << 6) + (h >> 2)))
//   derive_seed(m, ...)  left fold of combine over the arguments, starting at m
//
// Child seeds used by the library:
//   instruction (site, lane, index)  derive_seed(stack_seed, site, lane, index)
//   cell seed                        derive_seed(master, cell_index)
//   trial seed                       derive_seed(cell_seed, trial_index)

#include <cstdint>
#include <limits>

namespace arw {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept
{
    return mix64(h ^ (mix64(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

template <class... Ts>
constexpr std::uint64_t derive_seed(std::uint64_t master, Ts... parts) noexcept
{
    std::uint64_t h = master;
    ((h = combine(h, static_cast<std::uint64_t>(parts))), ...);
    return h;
}

/// Top 53 bits as a double in [0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based stream; satisfies UniformRandomBitGenerator.
///
/// Distributions are computed by hand from the raw bits so that sampled
/// values are identical across standard-library implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept
    {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept { return combine(key_, counter_++); }

    double uniform() noexcept { return to_unit((*this)()); }

    /// Uniform integer in [0, n) by rejection; n > 0.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace arw
