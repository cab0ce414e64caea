#include "sawnoise/tls_bath.hpp"

#include "sawnoise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace sawnoise {

void BathConfig::validate() const
{
    if (!(band_low_hz < band_high_hz))
        throw std::invalid_argument("BathConfig: band_low_hz must be < band_high_hz");
    if (!(gamma_min_hz < gamma_max_hz))
        throw std::invalid_argument("BathConfig: gamma_min_hz must be < gamma_max_hz");
    if (!(gamma_min_hz > 0.0))
        throw std::invalid_argument("BathConfig: gamma_min_hz must be > 0");
    if (!(guard_detuning_hz > 0.0))
        throw std::invalid_argument("BathConfig: guard_detuning_hz must be > 0");
    if (!(g_min_hz > 0.0) || !(g_max_hz >= g_min_hz))
        throw std::invalid_argument("BathConfig: coupling range invalid");
    if (!(d_scale_hz >= 0.0))
        throw std::invalid_argument("BathConfig: d_scale_hz must be >= 0");
    for (double f : mode_frequencies)
        if (f < band_low_hz || f > band_high_hz)
            throw std::invalid_argument("BathConfig: tls band must cover all mode frequencies");
}

namespace {

// Inverse-CDF draw from density ~ g^e truncated to [lo, hi].
double draw_power_law(RngStream& rng, double lo, double hi, double e)
{
    const double u = rng.uniform();
    if (std::abs(e + 1.0) < 1e-12)
        return lo * std::pow(hi / lo, u);  // log-uniform
    const double p = e + 1.0;
    return std::pow(std::pow(lo, p) + u * (std::pow(hi, p) - std::pow(lo, p)), 1.0 / p);
}

double clamp_detuning(double d, double guard_hz)
{
    const double floor = 0.5 * guard_hz;
    if (std::abs(d) >= floor) return d;
    return d >= 0.0 ? floor : -floor;
}

} // namespace

TlsEnsemble sample_ensemble(const BathConfig& cfg)
{
    cfg.validate();
    constexpr int kMaxResampleAttempts = 10000;

    RngStream rng(cfg.master_seed, kStreamEnsemble);
    TlsEnsemble out;
    out.master_seed = cfg.master_seed;
    out.defects.reserve(cfg.n_tls);

    for (std::size_t i = 0; i < cfg.n_tls; ++i) {
        TlsDefect d;
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt >= kMaxResampleAttempts)
                throw std::runtime_error(
                    "sample_ensemble: could not place defect outside guard band "
                    "(band too crowded)");
            d.base_frequency = rng.uniform(cfg.band_low_hz, cfg.band_high_hz);
            bool ok = true;
            for (double m : cfg.mode_frequencies)
                if (std::abs(d.base_frequency - m) < cfg.guard_detuning_hz) {
                    ok = false;
                    break;
                }
            if (ok) break;
        }
        d.coupling = draw_power_law(rng, cfg.g_min_hz, cfg.g_max_hz, cfg.g_exponent);
        d.sigma_z = -1;  // ground state
        d.saturated = false;
        d.fluctuator_shifts.resize(cfg.n_fluctuators_per_tls);
        d.fluctuators.resize(cfg.n_fluctuators_per_tls);
        for (std::size_t j = 0; j < cfg.n_fluctuators_per_tls; ++j) {
            d.fluctuator_shifts[j] = cfg.d_scale_hz * rng.sign();
            Fluctuator& fl = d.fluctuators[j];
            fl.switching_rate = rng.log_uniform(cfg.gamma_min_hz, cfg.gamma_max_hz);
            fl.current_state = rng.sign();
            fl.rng_stream_id =
                kStreamFluctuatorBase + i * cfg.n_fluctuators_per_tls + j;
        }
        out.defects.push_back(std::move(d));
    }
    return out;
}

std::vector<int> fluctuator_path(const Fluctuator& fluct, std::uint64_t master_seed,
                                 double duration_s, double dt_s)
{
    if (!(duration_s > 0.0) || !(dt_s > 0.0))
        throw std::invalid_argument("fluctuator_path: duration and dt must be > 0");

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s / dt_s));
    std::vector<int> path(n, fluct.current_state);

    RngStream rng(master_seed, fluct.rng_stream_id);
    int state = fluct.current_state;
    double t = rng.exponential(fluct.switching_rate);
    std::size_t filled = 0;
    while (t < duration_s) {
        const std::size_t bin =
            static_cast<std::size_t>(std::ceil(t / dt_s));
        for (std::size_t k = filled; k < std::min(bin, n); ++k) path[k] = state;
        filled = std::min(bin, n);
        state = -state;
        if (filled >= n) break;
        t += rng.exponential(fluct.switching_rate);
    }
    for (std::size_t k = filled; k < n; ++k) path[k] = state;
    return path;
}

double dispersive_shift(double mode_f, const TlsEnsemble& ensemble,
                        std::span<const double> instantaneous_f_tls,
                        double guard_hz)
{
    if (instantaneous_f_tls.size() != ensemble.defects.size())
        throw std::invalid_argument("dispersive_shift: snapshot size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < ensemble.defects.size(); ++i) {
        const TlsDefect& d = ensemble.defects[i];
        if (d.saturated) continue;
        const double det = clamp_detuning(mode_f - instantaneous_f_tls[i], guard_hz);
        total += d.coupling * d.coupling * d.sigma_z / det;
    }
    return total;
}

std::vector<BurstEvent> sample_burst_schedule(const BurstScheduleConfig& cfg,
                                              double duration_s,
                                              std::uint64_t master_seed)
{
    if (cfg.rate_hz < 0.0)
        throw std::invalid_argument("sample_burst_schedule: rate must be >= 0");
    std::vector<BurstEvent> out;
    if (cfg.rate_hz == 0.0) return out;

    RngStream rng(master_seed, kStreamBursts);
    double t = rng.exponential(cfg.rate_hz);
    while (t < duration_s) {
        BurstEvent e;
        e.onset_s = t;
        e.event_class = rng.uniform() < cfg.uniform_sign_fraction
                            ? BurstClass::uniform_sign
                            : BurstClass::anti_symmetric;
        e.peak_amplitude_hz = rng.log_uniform(cfg.amp_min_hz, cfg.amp_max_hz);
        e.pivot_mode = rng.uniform(cfg.pivot_min, cfg.pivot_max);
        e.relaxation_s = rng.uniform(cfg.tau_min_s, cfg.tau_max_s);
        out.push_back(e);
        t += rng.exponential(cfg.rate_hz);
    }
    return out;
}

double burst_contribution(const BurstEvent& event, int mode_index, int n_modes,
                          double t_s)
{
    if (t_s < event.onset_s) return 0.0;
    double profile = 1.0;
    if (event.event_class == BurstClass::anti_symmetric)
        profile = (mode_index - event.pivot_mode) / (n_modes - 1);
    return profile * event.peak_amplitude_hz *
           std::exp(-(t_s - event.onset_s) / event.relaxation_s);
}

namespace {

// One chunk of defects contributes a per-mode array of step deltas on the
// sample grid. Chunks are merged in a fixed order so the result does not
// depend on the worker count.
struct ChunkDeltas {
    std::vector<double> data;  // [mode][sample]
};

ChunkDeltas simulate_chunk(const TlsEnsemble& ens, std::size_t begin, std::size_t end,
                           std::span<const double> modes, double duration,
                           double dt, double guard, std::size_t n_samples)
{
    const std::size_t n_modes = modes.size();
    ChunkDeltas out;
    out.data.assign(n_modes * n_samples, 0.0);

    std::vector<double> next_switch;
    std::vector<RngStream> streams;
    std::vector<int> states;
    std::vector<double> shift_prev(n_modes);

    for (std::size_t i = begin; i < end; ++i) {
        const TlsDefect& d = ens.defects[i];
        if (d.saturated) continue;
        const std::size_t nf = d.fluctuators.size();

        streams.clear();
        next_switch.clear();
        states.clear();
        double inst_f = d.base_frequency;
        for (std::size_t j = 0; j < nf; ++j) {
            streams.emplace_back(ens.master_seed, d.fluctuators[j].rng_stream_id);
            next_switch.push_back(streams[j].exponential(d.fluctuators[j].switching_rate));
            states.push_back(d.fluctuators[j].current_state);
            inst_f += states[j] * d.fluctuator_shifts[j];
        }
        const double g2sz = d.coupling * d.coupling * d.sigma_z;
        for (std::size_t k = 0; k < n_modes; ++k)
            shift_prev[k] = g2sz / clamp_detuning(modes[k] - inst_f, guard);

        for (;;) {
            std::size_t jmin = 0;
            for (std::size_t j = 1; j < nf; ++j)
                if (next_switch[j] < next_switch[jmin]) jmin = j;
            const double t = next_switch[jmin];
            if (!(t < duration)) break;

            states[jmin] = -states[jmin];
            inst_f += 2.0 * states[jmin] * d.fluctuator_shifts[jmin];
            next_switch[jmin] +=
                streams[jmin].exponential(d.fluctuators[jmin].switching_rate);

            const std::size_t bin = static_cast<std::size_t>(std::ceil(t / dt));
            // Switch times are processed in increasing order, so once one
            // lands past the last sample none of the rest can contribute.
            if (bin >= n_samples) break;
            for (std::size_t k = 0; k < n_modes; ++k) {
                const double s = g2sz / clamp_detuning(modes[k] - inst_f, guard);
                out.data[k * n_samples + bin] += s - shift_prev[k];
                shift_prev[k] = s;
            }
        }
    }
    return out;
}

} // namespace

TimeTraceSet simulate_trace_set(const BathConfig& cfg, const SimulationConfig& sim,
                                std::span<const BurstEvent> bursts)
{
    cfg.validate();
    if (!(sim.duration_s > 0.0) || !(sim.dt_s > 0.0))
        throw std::invalid_argument("simulate_trace_set: duration and dt must be > 0");
    const std::size_t n_samples =
        static_cast<std::size_t>(std::llround(sim.duration_s / sim.dt_s));
    if (n_samples > sim.sample_cap)
        throw std::invalid_argument("simulate_trace_set: duration/dt exceeds sample cap");
    if (cfg.mode_frequencies.empty())
        throw std::invalid_argument("simulate_trace_set: no mode frequencies");

    const TlsEnsemble ens = sample_ensemble(cfg);
    const std::size_t n_modes = cfg.mode_frequencies.size();

    // Fixed chunking: chunk boundaries depend only on n_tls, never on the
    // worker count, and chunk buffers are merged in index order.
    constexpr std::size_t kChunkSize = 256;
    const std::size_t n_chunks = (cfg.n_tls + kChunkSize - 1) / kChunkSize;
    const int workers = std::max(1, sim.workers);
    constexpr std::size_t kBatch = 8;

    std::vector<double> total(n_modes * n_samples, 0.0);
    std::vector<std::future<ChunkDeltas>> batch;
    for (std::size_t c0 = 0; c0 < n_chunks; c0 += kBatch) {
        const std::size_t c1 = std::min(c0 + kBatch, n_chunks);
        batch.clear();
        for (std::size_t c = c0; c < c1; ++c) {
            const std::size_t begin = c * kChunkSize;
            const std::size_t end = std::min(begin + kChunkSize, cfg.n_tls);
            const auto policy = (workers > 1 && c > c0)
                                    ? std::launch::async
                                    : std::launch::deferred;
            batch.push_back(std::async(policy, simulate_chunk, std::cref(ens), begin,
                                       end, std::span<const double>(cfg.mode_frequencies),
                                       sim.duration_s, sim.dt_s,
                                       cfg.guard_detuning_hz, n_samples));
        }
        for (auto& f : batch) {
            const ChunkDeltas cd = f.get();
            for (std::size_t v = 0; v < total.size(); ++v) total[v] += cd.data[v];
        }
    }

    TimeTraceSet out;
    out.start_time_s = 0.0;
    out.dt_s = sim.dt_s;
    out.mode_frequencies = cfg.mode_frequencies;
    out.master_seed = cfg.master_seed;
    out.deviations.assign(n_modes, std::vector<double>(n_samples, 0.0));

    const int nm = static_cast<int>(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        std::vector<double>& trace = out.deviations[k];
        // Prefix-sum the step deltas: shift relative to the t = 0 value.
        double acc = 0.0;
        const double* deltas = total.data() + k * n_samples;
        for (std::size_t n = 0; n < n_samples; ++n) {
            acc += deltas[n];
            trace[n] = acc;
        }
        for (const BurstEvent& e : bursts) {
            const std::size_t first =
                e.onset_s <= 0.0 ? 0
                                 : static_cast<std::size_t>(std::ceil(e.onset_s / sim.dt_s));
            for (std::size_t n = first; n < n_samples; ++n)
                trace[n] += burst_contribution(e, static_cast<int>(k) + 1, nm,
                                               static_cast<double>(n) * sim.dt_s);
        }
        if (sim.noise_floor_hz > 0.0) {
            RngStream noise(cfg.master_seed, kStreamNoiseFloorBase + k);
            for (std::size_t n = 0; n < n_samples; ++n)
                trace[n] += sim.noise_floor_hz * noise.normal();
        }
    }
    return out;
}

std::vector<std::vector<Complex>> render_s11_traces(
    const TimeTraceSet& traces, std::span<const ResonatorParams> mode_params)
{
    if (mode_params.size() != traces.n_modes())
        throw std::invalid_argument("render_s11_traces: one ResonatorParams per mode required");
    std::vector<std::vector<Complex>> out(traces.n_modes());
    for (std::size_t k = 0; k < traces.n_modes(); ++k) {
        const ResonatorParams& base = mode_params[k];
        base.validate();
        const double probe = base.resonance_freq;
        out[k].reserve(traces.n_samples());
        ResonatorParams inst = base;
        for (double dev : traces.deviations[k]) {
            inst.resonance_freq = base.resonance_freq + dev;
            out[k].push_back(s11_response(inst, probe));
        }
    }
    return out;
}

std::string to_string(BurstClass c)
{
    return c == BurstClass::uniform_sign ? "uniform-sign" : "anti-symmetric";
}

BurstClass burst_class_from_string(const std::string& s)
{
    if (s == "uniform-sign") return BurstClass::uniform_sign;
    if (s == "anti-symmetric") return BurstClass::anti_symmetric;
    throw std::invalid_argument("unknown burst class: " + s);
}

} // namespace sawnoise
