#ifndef SAWNOISE_RNG_HPP
#define SAWNOISE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace sawnoise {

// Stream id ranges. Every stochastic draw in the simulator comes from a
// stream keyed by (master_seed, stream_id); draws within a stream are
// sequential, so results do not depend on scheduling.
inline constexpr std::uint64_t kStreamEnsemble = 0;
inline constexpr std::uint64_t kStreamBursts = 1;
inline constexpr std::uint64_t kStreamFluctuatorBase = 1ull << 32;
inline constexpr std::uint64_t kStreamNoiseFloorBase = 2ull << 32;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seeded random stream with hand-rolled distribution transforms, so the
// draw sequence is fixed by (master_seed, stream_id) and independent of
// the standard library's distribution implementation.
class RngStream
{
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : eng_(splitmix64(master_seed ^ splitmix64(stream_id + 0x1234abcdull)))
    {
    }

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform()
    {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double log_uniform(double lo, double hi)
    {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Standard normal via Box-Muller; one value per call, cached pair.
    double normal()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Exponential waiting time with the given rate (mean 1/rate).
    double exponential(double rate)
    {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    // Random sign, +1 or -1 with equal probability.
    int sign() { return (eng_() & 1ull) ? 1 : -1; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace sawnoise

#endif
