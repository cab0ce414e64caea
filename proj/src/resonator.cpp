#include "sawnoise/resonator.hpp"

#include "sawnoise/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sawnoise {

void ResonatorParams::validate() const
{
    if (!(amplitude_scale > 0.0))
        throw std::invalid_argument("ResonatorParams: amplitude_scale must be > 0");
    if (!(loaded_q > 0.0))
        throw std::invalid_argument("ResonatorParams: loaded_q must be > 0");
    if (!(external_q > 0.0))
        throw std::invalid_argument("ResonatorParams: external_q must be > 0");
    if (!(resonance_freq > 0.0))
        throw std::invalid_argument("ResonatorParams: resonance_freq must be > 0");
}

Complex s11_response(const ResonatorParams& p, double probe_f)
{
    const Complex prefactor =
        -p.amplitude_scale * std::exp(Complex(0.0, -(M_PI - p.cable_phase)));
    const Complex num =
        2.0 * (p.loaded_q / p.external_q) * std::exp(Complex(0.0, p.impedance_mismatch));
    const Complex den(1.0, 2.0 * p.loaded_q * (probe_f - p.resonance_freq) / p.resonance_freq);
    return prefactor * (1.0 - num / den);
}

ComplexSweep s11_sweep(const ResonatorParams& p, std::span<const double> grid)
{
    p.validate();
    if (grid.empty())
        throw std::invalid_argument("s11_sweep: empty frequency grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("s11_sweep: grid must be strictly increasing");

    ComplexSweep out;
    out.freq_hz.assign(grid.begin(), grid.end());
    out.s11.reserve(grid.size());
    for (double f : grid) out.s11.push_back(s11_response(p, f));
    return out;
}

ResonatorParams initial_guess(const ComplexSweep& sweep)
{
    const std::size_t n = sweep.freq_hz.size();
    std::size_t imin = 0;
    double amin = std::abs(sweep.s11[0]);
    for (std::size_t i = 1; i < n; ++i) {
        const double a = std::abs(sweep.s11[i]);
        if (a < amin) { amin = a; imin = i; }
    }
    const Complex edge = 0.5 * (sweep.s11.front() + sweep.s11.back());

    ResonatorParams g;
    g.resonance_freq = sweep.freq_hz[imin];
    g.amplitude_scale = std::max(std::abs(edge), 1e-6);
    g.cable_phase = std::arg(edge); // far off resonance S11 -> a e^{i theta}
    g.impedance_mismatch = 0.0;

    // Half-depth (in power) crossing on each side of the dip.
    const double base2 = std::norm(edge);
    const double half = 0.5 * (amin * amin + base2);
    std::size_t lo = imin, hi = imin;
    while (lo > 0 && std::norm(sweep.s11[lo]) < half) --lo;
    while (hi + 1 < n && std::norm(sweep.s11[hi]) < half) ++hi;
    double width = sweep.freq_hz[hi] - sweep.freq_hz[lo];
    if (!(width > 0.0))
        width = (sweep.freq_hz.back() - sweep.freq_hz.front()) / 10.0;
    g.loaded_q = std::clamp(g.resonance_freq / width, 10.0, 1e9);
    g.external_q = 2.0 * g.loaded_q;
    return g;
}

namespace {

// Internal fit parameterization: log a, theta, log Q_L, log Q_C, phi0,
// f_r scaled by a fixed reference. Keeps a and the Q's positive and the
// problem well scaled.
ResonatorParams decode(std::span<const double> x, double f_ref)
{
    ResonatorParams p;
    p.amplitude_scale = std::exp(x[0]);
    p.cable_phase = x[1];
    p.loaded_q = std::exp(x[2]);
    p.external_q = std::exp(x[3]);
    p.impedance_mismatch = x[4];
    p.resonance_freq = x[5] * f_ref;
    return p;
}

FitResult run_fit(const ComplexSweep& sweep, const ResonatorParams& guess,
                  const FitOptions& options)
{
    const std::size_t n = sweep.freq_hz.size();
    const double f_ref = guess.resonance_freq;

    std::vector<double> x0 = {
        std::log(guess.amplitude_scale), guess.cable_phase,
        std::log(guess.loaded_q), std::log(guess.external_q),
        guess.impedance_mismatch, guess.resonance_freq / f_ref,
    };

    auto residual = [&](std::span<const double> x, std::vector<double>& r) {
        const ResonatorParams p = decode(x, f_ref);
        r.resize(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const Complex d = s11_response(p, sweep.freq_hz[i]) - sweep.s11[i];
            r[2 * i] = d.real();
            r[2 * i + 1] = d.imag();
        }
    };

    LevMarOptions lm;
    lm.max_iterations = options.max_iterations;
    lm.ftol = options.ftol;
    lm.xtol = options.xtol;
    const LevMarResult res = levmar(residual, x0, 2 * n, lm);

    FitResult out;
    out.params = decode(res.x, f_ref);
    out.residual_norm = res.residual_norm;
    out.converged = res.converged;
    out.iterations = res.iterations;

    if (!res.covariance.empty()) {
        // Chain rule back from the internal parameterization.
        const std::array<double, 6> scale = {
            out.params.amplitude_scale, 1.0, out.params.loaded_q,
            out.params.external_q, 1.0, f_ref,
        };
        for (std::size_t j = 0; j < 6; ++j) {
            const double v = res.covariance[j * 6 + j];
            out.std_errors[j] = v > 0.0 ? std::sqrt(v) * scale[j] : 0.0;
        }
    }
    return out;
}

} // namespace

FitResult fit_resonance(const ComplexSweep& sweep, const ResonatorParams& guess,
                        const FitOptions& options)
{
    const std::size_t n = sweep.freq_hz.size();
    if (n != sweep.s11.size())
        throw std::invalid_argument("fit_resonance: freq/s11 length mismatch");
    if (2 * n < 6)
        throw std::invalid_argument("fit_resonance: sweep underdetermines the 6 parameters");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(sweep.s11[i].real()) || !std::isfinite(sweep.s11[i].imag()))
            throw std::invalid_argument("fit_resonance: non-finite sweep sample");
    guess.validate();

    FitResult best = run_fit(sweep, guess, options);

    // The impedance-mismatch phase has local minima; retry from rotated
    // phi0 starts when the first attempt leaves a visibly bad residual.
    const double scale = std::sqrt(static_cast<double>(2 * n)) *
                         std::max(guess.amplitude_scale, 1e-3);
    if (!best.converged || best.residual_norm > 1e-3 * scale) {
        for (double phi : {M_PI / 2, -M_PI / 2, M_PI}) {
            ResonatorParams g2 = guess;
            g2.impedance_mismatch = phi;
            const FitResult alt = run_fit(sweep, g2, options);
            if ((alt.converged && !best.converged) ||
                alt.residual_norm < best.residual_norm)
                best = alt;
        }
    }
    return best;
}

FrequencySample extract_frequency(Complex sample, double probe_f,
                                  const ResonatorParams& p, double singular_floor)
{
    p.validate();
    if (!(probe_f > 0.0))
        throw std::invalid_argument("extract_frequency: probe_f must be > 0");

    const Complex w = -sample * std::exp(Complex(0.0, M_PI - p.cable_phase)) /
                      p.amplitude_scale;
    const Complex one_minus_w = 1.0 - w;
    if (std::abs(one_minus_w) < singular_floor)
        throw std::runtime_error(
            "extract_frequency: sample at the off-resonant fixed point (inversion singular)");

    const Complex u = 2.0 * (p.loaded_q / p.external_q) *
                      std::exp(Complex(0.0, p.impedance_mismatch)) / one_minus_w;
    const Complex delta = (u - 1.0) / Complex(0.0, 2.0 * p.loaded_q);

    FrequencySample out;
    out.f_r_hz = probe_f / (1.0 + delta.real());
    out.consistency_residual = std::abs(delta.imag());
    if (!std::isfinite(out.f_r_hz) || !std::isfinite(out.consistency_residual))
        throw std::runtime_error("extract_frequency: non-finite inversion result");
    return out;
}

} // namespace sawnoise
