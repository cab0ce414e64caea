#include "sawnoise/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace sawnoise::detail {

bool is_power_of_two(std::size_t n)
{
    return n != 0 && (n & (n - 1)) == 0;
}

void fft(std::vector<std::complex<double>>& a, bool inverse)
{
    const std::size_t n = a.size();
    if (!is_power_of_two(n))
        throw std::invalid_argument("fft: length must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

std::vector<std::complex<double>> rfft(std::span<const double> x)
{
    std::vector<std::complex<double>> a(x.begin(), x.end());
    fft(a, false);
    a.resize(x.size() / 2 + 1);
    return a;
}

} // namespace sawnoise::detail
