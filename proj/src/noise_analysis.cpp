#include "sawnoise/noise_analysis.hpp"

#include "sawnoise/fft.hpp"
#include "sawnoise/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <stdexcept>

namespace sawnoise {

CorrelationMatrix correlation_matrix(const TimeTraceSet& traces, SampleRange window)
{
    const std::size_t n_modes = traces.n_modes();
    const std::size_t n = traces.n_samples();
    if (window.end > n || window.begin >= window.end)
        throw std::invalid_argument("correlation_matrix: window out of range");
    if (window.size() < 2)
        throw std::invalid_argument("correlation_matrix: window must hold >= 2 samples");

    const std::size_t len = window.size();
    std::vector<std::vector<double>> centered(n_modes);
    std::vector<double> var(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        const auto& x = traces.deviations[k];
        double mean = 0.0;
        for (std::size_t t = window.begin; t < window.end; ++t) mean += x[t];
        mean /= static_cast<double>(len);
        centered[k].resize(len);
        double ss = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double v = x[window.begin + t] - mean;
            centered[k][t] = v;
            ss += v * v;
        }
        if (ss == 0.0)
            throw std::runtime_error("correlation_matrix: mode " + std::to_string(k + 1) +
                                     " has zero variance in the window");
        var[k] = ss;
    }

    CorrelationMatrix out;
    out.n_modes = n_modes;
    out.mode_frequencies = traces.mode_frequencies;
    out.values.assign(n_modes * n_modes, 0.0);
    for (std::size_t i = 0; i < n_modes; ++i) {
        out.values[i * n_modes + i] = 1.0;
        for (std::size_t j = i + 1; j < n_modes; ++j) {
            double dot = 0.0;
            for (std::size_t t = 0; t < len; ++t) dot += centered[i][t] * centered[j][t];
            const double c = dot / std::sqrt(var[i] * var[j]);
            out.values[i * n_modes + j] = c;
            out.values[j * n_modes + i] = c;
        }
    }
    return out;
}

std::vector<DetuningCurvePoint> correlation_vs_detuning(const CorrelationMatrix& c,
                                                        double bin_width_hz)
{
    if (c.n_modes < 2)
        throw std::invalid_argument("correlation_vs_detuning: need >= 2 modes");
    if (!(bin_width_hz > 0.0))
        throw std::invalid_argument("correlation_vs_detuning: bin width must be > 0");

    std::map<std::size_t, DetuningCurvePoint> bins;
    for (std::size_t i = 0; i < c.n_modes; ++i)
        for (std::size_t j = i + 1; j < c.n_modes; ++j) {
            const double det = std::abs(c.mode_frequencies[i] - c.mode_frequencies[j]);
            const std::size_t b = static_cast<std::size_t>(det / bin_width_hz);
            DetuningCurvePoint& p = bins[b];
            p.mean_detuning_hz += det;
            p.mean_correlation += c.at(i, j);
            p.n_pairs += 1;
        }
    std::vector<DetuningCurvePoint> out;
    out.reserve(bins.size());
    for (auto& [b, p] : bins) {
        p.mean_detuning_hz /= static_cast<double>(p.n_pairs);
        p.mean_correlation /= static_cast<double>(p.n_pairs);
        out.push_back(p);
    }
    return out;
}

std::string window_name(SpectralWindow w)
{
    return w == SpectralWindow::hann ? "hann" : "rectangular";
}

NoisePsd welch_psd(std::span<const double> trace, double dt_s,
                   std::size_t segment_length, double overlap, SpectralWindow window)
{
    if (!(dt_s > 0.0))
        throw std::invalid_argument("welch_psd: dt must be > 0");
    if (segment_length > trace.size())
        throw std::invalid_argument("welch_psd: segment longer than trace");
    if (!detail::is_power_of_two(segment_length))
        throw std::invalid_argument("welch_psd: segment length must be a power of two");
    if (overlap < 0.0 || overlap > 0.9)
        throw std::invalid_argument("welch_psd: overlap must be in [0, 0.9]");

    const std::size_t L = segment_length;
    std::vector<double> win(L, 1.0);
    if (window == SpectralWindow::hann)
        for (std::size_t i = 0; i < L; ++i)
            win[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                                           static_cast<double>(L)));
    double win_power = 0.0;
    for (double w : win) win_power += w * w;

    std::size_t step = static_cast<std::size_t>(
        std::llround(static_cast<double>(L) * (1.0 - overlap)));
    step = std::max<std::size_t>(step, 1);

    const std::size_t n_bins = L / 2;  // bins 1..L/2 (0 excluded, Nyquist kept)
    std::vector<double> accum(n_bins, 0.0);
    std::vector<std::complex<double>> seg(L);
    std::size_t n_segments = 0;
    for (std::size_t start = 0; start + L <= trace.size(); start += step) {
        double mean = 0.0;
        for (std::size_t i = 0; i < L; ++i) mean += trace[start + i];
        mean /= static_cast<double>(L);
        for (std::size_t i = 0; i < L; ++i)
            seg[i] = std::complex<double>((trace[start + i] - mean) * win[i], 0.0);
        detail::fft(seg);
        for (std::size_t m = 1; m <= n_bins; ++m)
            accum[m - 1] += std::norm(seg[m]);
        ++n_segments;
    }
    if (n_segments == 0)
        throw std::invalid_argument("welch_psd: trace shorter than one segment");

    NoisePsd out;
    out.segment_length = L;
    out.overlap = overlap;
    out.window_name = window_name(window);
    out.n_segments = n_segments;
    out.freq_hz.resize(n_bins);
    out.psd_hz2_per_hz.resize(n_bins);
    const double norm = dt_s / (win_power * static_cast<double>(n_segments));
    for (std::size_t m = 1; m <= n_bins; ++m) {
        out.freq_hz[m - 1] = static_cast<double>(m) / (static_cast<double>(L) * dt_s);
        const double one_sided = (m == n_bins) ? 1.0 : 2.0;  // no doubling at Nyquist
        out.psd_hz2_per_hz[m - 1] = one_sided * norm * accum[m - 1];
    }
    return out;
}

double psd_model(double f_hz, const NoiseModelFit& fit)
{
    if (!(f_hz > 0.0))
        throw std::invalid_argument("psd_model: frequency must be > 0");
    double s = 0.0;
    if (fit.active.flicker) s += fit.h_minus1_hz2 / f_hz;
    if (fit.active.white) s += fit.h0_hz2_per_hz;
    if (fit.active.lorentzian) {
        const double x = 2.0 * M_PI * f_hz * fit.tau0_s;
        s += 4.0 * fit.amplitude_hz * fit.amplitude_hz * fit.tau0_s / (1.0 + x * x);
    }
    return s;
}

double adev_model(double tau_s, const NoiseModelFit& fit)
{
    if (!(tau_s > 0.0))
        throw std::invalid_argument("adev_model: tau must be > 0");
    double s = 0.0;
    if (fit.active.flicker) s += std::sqrt(2.0 * std::log(2.0) * fit.h_minus1_hz2);
    if (fit.active.white) s += std::sqrt(fit.h0_hz2_per_hz / (2.0 * tau_s));
    if (fit.active.lorentzian) {
        const double x = tau_s / fit.tau0_s;
        double bracket;
        if (x < 1e-3) {
            // 4e^-x - e^-2x + 2x - 3 = (2/3)x^3 - (1/2)x^4 + O(x^5)
            bracket = x * x * x * (2.0 / 3.0 - 0.5 * x);
        } else {
            bracket = 4.0 * std::exp(-x) - std::exp(-2.0 * x) + 2.0 * x - 3.0;
        }
        s += fit.amplitude_hz / x * std::sqrt(std::max(bracket, 0.0));
    }
    return s;
}

namespace {

struct ModelParamMap {
    // Indices into the packed log-parameter vector; -1 when inactive.
    int i_flicker = -1, i_white = -1, i_amp = -1, i_tau0 = -1;
    std::size_t count = 0;
};

ModelParamMap make_map(ActiveComponents a)
{
    ModelParamMap m;
    int idx = 0;
    if (a.flicker) m.i_flicker = idx++;
    if (a.white) m.i_white = idx++;
    if (a.lorentzian) {
        m.i_amp = idx++;
        m.i_tau0 = idx++;
    }
    m.count = static_cast<std::size_t>(idx);
    return m;
}

NoiseModelFit unpack(std::span<const double> x, const ModelParamMap& m,
                     ActiveComponents a)
{
    NoiseModelFit fit;
    fit.active = a;
    if (m.i_flicker >= 0) fit.h_minus1_hz2 = std::exp(x[m.i_flicker]);
    if (m.i_white >= 0) fit.h0_hz2_per_hz = std::exp(x[m.i_white]);
    if (m.i_amp >= 0) fit.amplitude_hz = std::exp(x[m.i_amp]);
    if (m.i_tau0 >= 0) fit.tau0_s = std::exp(x[m.i_tau0]);
    return fit;
}

void fill_std_errors(NoiseModelFit& fit, const LevMarResult& res,
                     const ModelParamMap& m)
{
    auto se = [&](int i, double value) {
        if (i < 0 || res.covariance.empty()) return 0.0;
        const double v = res.covariance[static_cast<std::size_t>(i) * m.count +
                                        static_cast<std::size_t>(i)];
        return v > 0.0 ? std::sqrt(v) * value : 0.0;  // d exp(x) = exp(x) dx
    };
    fit.stderr_h_minus1 = se(m.i_flicker, fit.h_minus1_hz2);
    fit.stderr_h0 = se(m.i_white, fit.h0_hz2_per_hz);
    fit.stderr_amplitude = se(m.i_amp, fit.amplitude_hz);
    fit.stderr_tau0 = se(m.i_tau0, fit.tau0_s);
}

// Multi-start over tau0 decades; the other components get data-driven
// starting values.
std::vector<std::vector<double>> starting_points(
    const ModelParamMap& m, std::span<const double> f, std::span<const double> y,
    bool log_domain_is_psd)
{
    double flick0 = 1.0, white0 = 1e-6, amp0 = 1.0;
    if (log_domain_is_psd) {
        std::vector<double> hf(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) hf[i] = y[i] * f[i];
        std::nth_element(hf.begin(), hf.begin() + hf.size() / 2, hf.end());
        flick0 = std::max(hf[hf.size() / 2], 1e-12);
        white0 = std::max(*std::min_element(y.begin(), y.end()), 1e-12);
        amp0 = std::sqrt(std::max(y[0] * f[0], 1e-12));
    } else {
        const double top = *std::max_element(y.begin(), y.end());
        flick0 = std::max(y.back() * y.back() / (2.0 * std::log(2.0)), 1e-12);
        white0 = std::max(y[0] * y[0] * 2.0 * f[0], 1e-12);
        amp0 = std::max(top, 1e-6);
    }
    std::vector<std::vector<double>> starts;
    for (double tau0 : {0.1, 1.0, 10.0}) {
        std::vector<double> x(m.count, 0.0);
        if (m.i_flicker >= 0) x[m.i_flicker] = std::log(flick0);
        if (m.i_white >= 0) x[m.i_white] = std::log(white0);
        if (m.i_amp >= 0) x[m.i_amp] = std::log(amp0);
        if (m.i_tau0 >= 0) x[m.i_tau0] = std::log(tau0);
        starts.push_back(std::move(x));
        if (m.i_tau0 < 0) break;  // no tau0 -> single start
    }
    return starts;
}

NoiseModelFit fit_log_model(std::span<const double> f, std::span<const double> y,
                            ActiveComponents active, bool is_psd)
{
    const ModelParamMap m = make_map(active);
    if (m.count == 0)
        throw std::invalid_argument("noise model fit: no active components");

    auto residual = [&](std::span<const double> x, std::vector<double>& r) {
        const NoiseModelFit fit = unpack(x, m, active);
        r.resize(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double model = is_psd ? psd_model(f[i], fit) : adev_model(f[i], fit);
            r[i] = std::log(std::max(model, 1e-300)) - std::log(y[i]);
        }
    };

    LevMarResult best;
    bool have = false;
    for (auto& x0 : starting_points(m, f, y, is_psd)) {
        LevMarResult res = levmar(residual, x0, f.size());
        if (!have || res.residual_norm < best.residual_norm) {
            best = std::move(res);
            have = true;
        }
    }

    NoiseModelFit fit = unpack(best.x, m, active);
    fit.residual_norm = best.residual_norm;
    fit.converged = best.converged;
    fill_std_errors(fit, best, m);
    return fit;
}

} // namespace

NoiseModelFit fit_noise_model(const NoisePsd& psd, ActiveComponents active,
                              double f_lo_hz, double f_hi_hz)
{
    std::vector<double> f, s;
    bool any_positive = false;
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i) {
        if (psd.psd_hz2_per_hz[i] > 0.0) any_positive = true;
        if (psd.freq_hz[i] >= f_lo_hz && psd.freq_hz[i] <= f_hi_hz &&
            psd.psd_hz2_per_hz[i] > 0.0) {
            f.push_back(psd.freq_hz[i]);
            s.push_back(psd.psd_hz2_per_hz[i]);
        }
    }
    if (!any_positive)
        throw std::invalid_argument("fit_noise_model: all-zero PSD");
    if (f.size() < 8)
        throw std::invalid_argument("fit_noise_model: need >= 8 frequency points in range");
    return fit_log_model(f, s, active, true);
}

AdevCurve allan_deviation(std::span<const double> trace, double dt_s,
                          std::span<const double> taus_s)
{
    if (!(dt_s > 0.0))
        throw std::invalid_argument("allan_deviation: dt must be > 0");
    const std::size_t n = trace.size();
    const double span = static_cast<double>(n) * dt_s;

    // Prefix sums for O(1) window averages.
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + trace[i];

    AdevCurve out;
    for (double tau : taus_s) {
        const double ratio = tau / dt_s;
        const auto mi = static_cast<long long>(std::llround(ratio));
        if (mi < 1 || std::abs(ratio - static_cast<double>(mi)) > 1e-9 * std::max(ratio, 1.0))
            throw std::invalid_argument("allan_deviation: tau must be a positive multiple of dt");
        if (tau > span / 3.0)
            throw std::invalid_argument("allan_deviation: tau exceeds a third of the trace span");
        const std::size_t mm = static_cast<std::size_t>(mi);
        if (n < 2 * mm + 1)
            throw std::invalid_argument("allan_deviation: trace too short for tau");

        double acc = 0.0;
        const std::size_t count = n - 2 * mm + 1;
        const double inv_m = 1.0 / static_cast<double>(mm);
        for (std::size_t k = 0; k + 2 * mm <= n; ++k) {
            const double y0 = (cum[k + mm] - cum[k]) * inv_m;
            const double y1 = (cum[k + 2 * mm] - cum[k + mm]) * inv_m;
            const double d = y1 - y0;
            acc += d * d;
        }
        out.tau_s.push_back(tau);
        out.sigma_hz.push_back(std::sqrt(0.5 * acc / static_cast<double>(count)));
    }
    return out;
}

NoiseModelFit fit_adev_model(const AdevCurve& curve, ActiveComponents active)
{
    std::vector<double> t, s;
    for (std::size_t i = 0; i < curve.tau_s.size(); ++i)
        if (curve.sigma_hz[i] > 0.0) {
            t.push_back(curve.tau_s[i]);
            s.push_back(curve.sigma_hz[i]);
        }
    if (t.size() < 6)
        throw std::invalid_argument("fit_adev_model: need >= 6 tau points");
    return fit_log_model(t, s, active, false);
}

namespace {

double median_of(std::vector<double>& scratch)
{
    const std::size_t n = scratch.size();
    auto mid = scratch.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(scratch.begin(), mid, scratch.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(scratch.begin(), mid);
    return 0.5 * (lo + hi);
}

// Rolling robust sigma (1.4826 * MAD) of d over a trailing window.
struct RollingStats {
    std::vector<double> median;
    std::vector<double> sigma;  // 1.4826 * MAD
};

RollingStats rolling_robust_stats(const std::vector<double>& d, std::size_t window)
{
    const std::size_t n = d.size();
    RollingStats out;
    out.median.assign(n, 0.0);
    out.sigma.assign(n, 0.0);
    std::vector<double> scratch;
    const std::size_t w = std::max<std::size_t>(window, 16);
    // Recompute the window statistics every stride samples; the background
    // level drifts slowly compared to the window length.
    const std::size_t stride = std::max<std::size_t>(w / 8, 1);
    double med = 0.0, sig = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
        const std::size_t lo = i >= w ? i - w : 0;
        const std::size_t hi = std::max<std::size_t>(i, std::min(w, n));
        scratch.assign(d.begin() + static_cast<std::ptrdiff_t>(lo),
                       d.begin() + static_cast<std::ptrdiff_t>(hi));
        med = median_of(scratch);
        for (double& v : scratch) v = std::abs(v - med);
        sig = 1.4826 * median_of(scratch);
        const std::size_t stop = std::min(i + stride, n);
        for (std::size_t k = i; k < stop; ++k) {
            out.median[k] = med;
            out.sigma[k] = sig;
        }
    }
    return out;
}

} // namespace

std::vector<DetectedBurst> detect_bursts(const TimeTraceSet& traces,
                                         const BurstDetectionOptions& opts)
{
    if (!(opts.threshold > 0.0))
        throw std::invalid_argument("detect_bursts: threshold must be > 0");
    const std::size_t n = traces.n_samples();
    const std::size_t n_modes = traces.n_modes();
    std::vector<DetectedBurst> out;
    if (n < 3 || n_modes == 0) return out;

    // Score each mode's first difference against its own rolling robust
    // statistics, then take the cross-mode maximum. Normalizing per mode
    // keeps the threshold in plain Gaussian-sigma units; normalizing the
    // max-over-modes statistic instead would put the detection threshold
    // only slightly above the expected extreme of a noise-only trace.
    std::vector<double> score(n, 0.0);
    {
        std::vector<double> dk(n, 0.0);
        for (std::size_t k = 0; k < n_modes; ++k) {
            for (std::size_t t = 1; t < n; ++t)
                dk[t] = traces.deviations[k][t] - traces.deviations[k][t - 1];
            const RollingStats stats = rolling_robust_stats(dk, opts.mad_window);
            for (std::size_t t = 1; t < n; ++t) {
                const double s = stats.sigma[t] > 0.0 ? stats.sigma[t] : 1e-300;
                score[t] = std::max(score[t], std::abs(dk[t] - stats.median[t]) / s);
            }
        }
    }
    auto score_at = [&](std::size_t i) { return score[i]; };

    const std::size_t min_sep =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround(opts.min_separation_s / traces.dt_s)));

    std::size_t t = 1;
    while (t < n) {
        if (score_at(t) <= opts.threshold) {
            ++t;
            continue;
        }
        DetectedBurst b;
        b.onset_index = t;
        b.score = score_at(t);

        // Everything closer than min_sep belongs to the same event.
        std::size_t last_hit = t;
        std::size_t u = t + 1;
        while (u < n && u - last_hit < min_sep) {
            const double su = score_at(u);
            if (su > opts.threshold) {
                last_hit = u;
                b.score = std::max(b.score, su);
            }
            ++u;
        }
        const std::size_t window_end = std::min(n, last_hit + min_sep);

        // Per-mode peak deviations relative to the pre-onset baseline.
        const std::size_t base_idx = b.onset_index - 1;
        b.peak_deviation_hz.resize(n_modes, 0.0);
        std::size_t dominant = 0;
        double dominant_abs = -1.0;
        for (std::size_t k = 0; k < n_modes; ++k) {
            const double base = traces.deviations[k][base_idx];
            double peak = 0.0;
            for (std::size_t v = b.onset_index; v < window_end; ++v) {
                const double dev = traces.deviations[k][v] - base;
                if (std::abs(dev) > std::abs(peak)) peak = dev;
            }
            b.peak_deviation_hz[k] = peak;
            if (std::abs(peak) > dominant_abs) {
                dominant_abs = std::abs(peak);
                dominant = k;
            }
        }

        // Exponential tail fit on the dominant mode: ln|y| vs t is linear.
        {
            const double base = traces.deviations[dominant][base_idx];
            std::size_t peak_idx = b.onset_index;
            double peak_val = 0.0;
            for (std::size_t v = b.onset_index; v < window_end; ++v) {
                const double dev = traces.deviations[dominant][v] - base;
                if (std::abs(dev) > std::abs(peak_val)) {
                    peak_val = dev;
                    peak_idx = v;
                }
            }
            double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
            std::size_t cnt = 0;
            // Follow the tail beyond the detection window until it decays
            // into the background.
            const std::size_t tail_end = std::min(n, peak_idx + 50 * min_sep);
            for (std::size_t v = peak_idx; v < tail_end; ++v) {
                const double dev = traces.deviations[dominant][v] - base;
                if (dev * peak_val <= 0.0) break;  // crossed the baseline
                if (std::abs(dev) < 0.05 * std::abs(peak_val)) break;
                const double x = static_cast<double>(v - peak_idx) * traces.dt_s;
                const double y = std::log(std::abs(dev));
                sx += x; sy += y; sxx += x * x; sxy += x * y;
                ++cnt;
            }
            if (cnt >= 3) {
                const double denom = static_cast<double>(cnt) * sxx - sx * sx;
                if (denom > 0.0) {
                    const double slope = (static_cast<double>(cnt) * sxy - sx * sy) / denom;
                    if (slope < 0.0) b.fitted_relaxation_s = -1.0 / slope;
                }
            }
        }

        out.push_back(std::move(b));
        t = window_end;
    }
    return out;
}

std::vector<double> default_tau_grid(double dt_s, double tau_max_s, std::size_t n_points)
{
    std::vector<double> taus;
    const double lo = std::log(dt_s);
    const double hi = std::log(std::max(tau_max_s, dt_s));
    long long prev = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double x = n_points == 1 ? lo
                                       : lo + (hi - lo) * static_cast<double>(i) /
                                                 static_cast<double>(n_points - 1);
        const long long m = std::max<long long>(1, std::llround(std::exp(x) / dt_s));
        if (m != prev) {
            taus.push_back(static_cast<double>(m) * dt_s);
            prev = m;
        }
    }
    return taus;
}

} // namespace sawnoise
