#ifndef SAWNOISE_RESONATOR_HPP
#define SAWNOISE_RESONATOR_HPP

#include <array>
#include <complex>
#include <span>
#include <vector>

namespace sawnoise {

using Complex = std::complex<double>;

// Single-port reflection model parameters:
//   S11(f) = -a e^{-i(pi-theta)} [1 - 2(Q_L/Q_C) e^{i phi0}
//                                   / (1 + 2i Q_L (f - f_r)/f_r)]
struct ResonatorParams {
    double amplitude_scale = 1.0;    // a, > 0
    double cable_phase = 0.0;        // theta, radians
    double loaded_q = 1e5;           // Q_L, > 0
    double external_q = 2e5;         // Q_C, > 0
    double impedance_mismatch = 0.0; // phi0, radians
    double resonance_freq = 2.39e9;  // f_r, Hz, > 0

    // Throws std::invalid_argument on a <= 0, Q_L <= 0, Q_C <= 0 or
    // f_r <= 0. Q_L <= Q_C is deliberately not required.
    void validate() const;
};

struct ComplexSweep {
    std::vector<double> freq_hz;   // strictly increasing
    std::vector<Complex> s11;      // same length
};

struct FitOptions {
    int max_iterations = 300;
    double ftol = 1e-12;
    double xtol = 1e-10;
};

struct FitResult {
    ResonatorParams params;
    // Standard errors in the order (a, theta, Q_L, Q_C, phi0, f_r);
    // zero when the covariance could not be estimated.
    std::array<double, 6> std_errors{};
    double residual_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct FrequencySample {
    double f_r_hz = 0.0;
    double consistency_residual = 0.0; // |Im delta|, ~0 on the model manifold
};

Complex s11_response(const ResonatorParams& params, double probe_f);

// Pointwise s11_response over a strictly increasing grid; throws on an
// empty or non-monotone grid.
ComplexSweep s11_sweep(const ResonatorParams& params, std::span<const double> grid);

// Deterministic initial guess: f_r at the |S11| minimum, Q_L from the
// half-depth dip width, a and theta from the sweep endpoints, phi0 = 0,
// Q_C = 2 Q_L.
ResonatorParams initial_guess(const ComplexSweep& sweep);

// Least squares over all six parameters on stacked re/im residuals.
// Throws if the sweep has fewer points than parameters; non-convergence
// is reported through FitResult::converged, never silently.
FitResult fit_resonance(const ComplexSweep& sweep, const ResonatorParams& guess,
                        const FitOptions& options = {});

// Analytic inversion of the reflection model for the instantaneous
// resonance frequency. Throws when the sample sits at the off-resonant
// fixed point (|1 - w| below singular_floor) or the result is not finite.
FrequencySample extract_frequency(Complex sample, double probe_f,
                                  const ResonatorParams& params,
                                  double singular_floor = 1e-6);

} // namespace sawnoise

#endif
