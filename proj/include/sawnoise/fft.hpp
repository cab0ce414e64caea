#ifndef SAWNOISE_FFT_HPP
#define SAWNOISE_FFT_HPP

#include <complex>
#include <span>
#include <vector>

namespace sawnoise::detail {

// In-place iterative radix-2 complex FFT. Length must be a power of two.
void fft(std::vector<std::complex<double>>& data, bool inverse = false);

bool is_power_of_two(std::size_t n);

// DFT of a real signal, returning bins 0..n/2 (n power of two).
std::vector<std::complex<double>> rfft(std::span<const double> x);

} // namespace sawnoise::detail

#endif
