#ifndef SAWNOISE_NOISE_ANALYSIS_HPP
#define SAWNOISE_NOISE_ANALYSIS_HPP

#include "sawnoise/tls_bath.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sawnoise {

struct SampleRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    std::size_t size() const { return end - begin; }
};

struct CorrelationMatrix {
    std::size_t n_modes = 0;
    std::vector<double> values;  // row-major, symmetric, unit diagonal
    std::vector<double> mode_frequencies;

    double at(std::size_t i, std::size_t j) const { return values[i * n_modes + j]; }
};

struct DetuningCurvePoint {
    double mean_detuning_hz = 0.0;
    double mean_correlation = 0.0;
    std::size_t n_pairs = 0;
};

enum class SpectralWindow { hann, rectangular };

struct NoisePsd {
    std::vector<double> freq_hz;       // positive, increasing, excludes 0
    std::vector<double> psd_hz2_per_hz;
    std::size_t segment_length = 0;
    double overlap = 0.0;
    std::string window_name;
    std::size_t n_segments = 0;
};

struct AdevCurve {
    std::vector<double> tau_s;   // increasing
    std::vector<double> sigma_hz;
    std::string estimator_name = "overlapping-adev";
};

struct ActiveComponents {
    bool flicker = true;     // h_-1 / f
    bool white = true;       // h_0
    bool lorentzian = true;  // 4 A^2 tau0 / (1 + (2 pi f tau0)^2)
};

struct NoiseModelFit {
    double h_minus1_hz2 = 0.0;
    double h0_hz2_per_hz = 0.0;
    double amplitude_hz = 0.0;   // A
    double tau0_s = 0.0;
    ActiveComponents active;
    double residual_norm = 0.0;
    bool converged = false;
    // Standard errors for the active parameters, same units as the values;
    // zero for inactive parameters or when unavailable.
    double stderr_h_minus1 = 0.0;
    double stderr_h0 = 0.0;
    double stderr_amplitude = 0.0;
    double stderr_tau0 = 0.0;
};

struct DetectedBurst {
    std::size_t onset_index = 0;
    std::vector<double> peak_deviation_hz;  // per mode, signed
    double fitted_relaxation_s = 0.0;       // 0 when the tail fit failed
    double score = 0.0;                     // peak robust-sigma score
};

struct BurstDetectionOptions {
    double threshold = 8.0;          // in robust-sigma units of the first difference
    double min_separation_s = 5.0;
    std::size_t mad_window = 600;    // rolling MAD window, samples
};

// Pearson correlation over [window.begin, window.end) with per-window mean
// removal. Throws when a mode has zero variance in the window (names the
// mode) or the window is shorter than 2 samples.
CorrelationMatrix correlation_matrix(const TimeTraceSet& traces, SampleRange window);

// Off-diagonal pairs binned by |f_i - f_j|; empty bins omitted.
std::vector<DetuningCurvePoint> correlation_vs_detuning(const CorrelationMatrix& c,
                                                        double bin_width_hz);

// One-sided Welch periodogram, window-power normalized so that the PSD of
// stationary white input integrates to its variance. segment_length must
// be a power of two and no longer than the trace.
NoisePsd welch_psd(std::span<const double> trace, double dt_s,
                   std::size_t segment_length, double overlap,
                   SpectralWindow window = SpectralWindow::hann);

double psd_model(double f_hz, const NoiseModelFit& fit);

// Least squares on log(S) with log-parameterized non-negative components,
// over freq in [f_lo, f_hi]. Needs >= 8 usable points.
NoiseModelFit fit_noise_model(const NoisePsd& psd, ActiveComponents active,
                              double f_lo_hz, double f_hi_hz);

// Overlapping Allan deviation of a frequency-deviation series (Hz units,
// non-normalized). Each tau must be a positive multiple of dt and at most
// a third of the trace span.
AdevCurve allan_deviation(std::span<const double> trace, double dt_s,
                          std::span<const double> taus_s);

double adev_model(double tau_s, const NoiseModelFit& fit);

NoiseModelFit fit_adev_model(const AdevCurve& curve, ActiveComponents active);

// Change-point detection on first differences, each mode normalized by
// its own rolling median absolute deviation, combined across modes by
// taking the maximum score.
std::vector<DetectedBurst> detect_bursts(const TimeTraceSet& traces,
                                         const BurstDetectionOptions& opts = {});

// Log-spaced tau grid snapped to multiples of dt, deduplicated.
std::vector<double> default_tau_grid(double dt_s, double tau_max_s,
                                     std::size_t n_points = 30);

std::string window_name(SpectralWindow w);

} // namespace sawnoise

#endif
