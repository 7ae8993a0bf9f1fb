#ifndef LILDE_RNG_HPP
#define LILDE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace lilde {

/// SplitMix64 generator. Cheap to construct, used for per-evaluation
/// sub-streams and for deriving seeds from a run seed.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state = 0) : _state(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        std::uint64_t z = (_state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t _state;
};

/// Deterministically mixes a parent seed with a stream tag and an index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0)
{
    SplitMix64 mix(seed ^ (tag * 0xD1B54A32D192ED03ull));
    std::uint64_t a = mix();
    SplitMix64 mix2(a ^ (index * 0x8CB92BA72F3D8DD7ull));
    return mix2();
}

/// Main engine stream.
using Rng = std::mt19937_64;

/// Uniform real in [0, 1), 53-bit resolution, platform independent.
template <typename Gen>
double uniform_01(Gen& gen)
{
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Uniform real in (0, 1].
template <typename Gen>
double uniform_open_closed(Gen& gen)
{
    return static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;
}

/// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
template <typename Gen>
std::uint64_t uniform_index(Gen& gen, std::uint64_t n)
{
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
        r = gen();
    } while (r >= limit);
    return r % n;
}

/// Standard normal draw via Box-Muller on the generator's raw output.
template <typename Gen>
double standard_normal(Gen& gen)
{
    // No cached second variate: each call depends only on the generator state.
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = uniform_open_closed(gen);
    const double u2 = uniform_01(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace lilde

#endif
