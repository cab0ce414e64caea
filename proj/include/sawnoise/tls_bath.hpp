#ifndef SAWNOISE_TLS_BATH_HPP
#define SAWNOISE_TLS_BATH_HPP

#include "sawnoise/resonator.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sawnoise {

struct Fluctuator {
    double switching_rate = 0.0;   // gamma, Hz, > 0
    int current_state = -1;        // +1 or -1
    std::uint64_t rng_stream_id = 0;
};

struct TlsDefect {
    double base_frequency = 0.0;   // f_TLS, Hz
    double coupling = 0.0;         // g, Hz, >= 0
    int sigma_z = -1;              // -1 or +1
    bool saturated = false;        // saturated defects contribute no shift
    std::vector<double> fluctuator_shifts;  // signed d_m per fluctuator, Hz
    std::vector<Fluctuator> fluctuators;
};

struct BathConfig {
    std::vector<double> mode_frequencies;  // Hz
    std::size_t n_tls = 5000;
    double band_low_hz = 2.36e9;
    double band_high_hz = 2.41e9;
    double g_min_hz = 1e3;
    double g_max_hz = 2e4;
    double g_exponent = -1.0;      // density ~ g^exponent on [g_min, g_max]
    std::size_t n_fluctuators_per_tls = 8;
    double gamma_min_hz = 1e-4;
    double gamma_max_hz = 1.0;
    double d_scale_hz = 2e4;       // per-fluctuator frequency shift magnitude
    double guard_detuning_hz = 2e6; // delta_min
    std::uint64_t master_seed = 0;

    void validate() const;
};

struct TlsEnsemble {
    std::vector<TlsDefect> defects;
    std::uint64_t master_seed = 0;
};

enum class BurstClass { uniform_sign, anti_symmetric };

struct BurstEvent {
    double onset_s = 0.0;
    BurstClass event_class = BurstClass::uniform_sign;
    double peak_amplitude_hz = 0.0;
    double pivot_mode = 0.0;       // k0, real valued, anti-symmetric class only
    double relaxation_s = 1.0;     // tau_e, > 0
};

struct BurstScheduleConfig {
    double rate_hz = 2e-4;
    double uniform_sign_fraction = 0.3;  // class mix: P(uniform-sign)
    double amp_min_hz = 2e3;             // A_e log-uniform range
    double amp_max_hz = 2e4;
    double pivot_min = 8.0;              // k0 uniform range (mode index units)
    double pivot_max = 12.0;
    double tau_min_s = 1.2;
    double tau_max_s = 3.0;
};

struct TimeTraceSet {
    double start_time_s = 0.0;
    double dt_s = 0.0;
    std::vector<double> mode_frequencies;          // Hz per mode
    std::vector<std::vector<double>> deviations;   // [mode][sample], Hz
    std::uint64_t master_seed = 0;

    std::size_t n_modes() const { return deviations.size(); }
    std::size_t n_samples() const { return deviations.empty() ? 0 : deviations[0].size(); }
};

struct SimulationConfig {
    double duration_s = 2.6e4;
    double dt_s = 0.5;
    double noise_floor_hz = 5.0;   // additive white measurement noise per mode
    std::size_t sample_cap = 2'000'000;
    int workers = 1;               // result is bit-identical for any value
};

// Draws the full ensemble from (cfg, cfg.master_seed). Defects within
// guard_detuning_hz of any mode frequency are resampled; throws if the
// band is too crowded to place a defect after a bounded number of tries.
TlsEnsemble sample_ensemble(const BathConfig& cfg);

// Symmetric random telegraph path (+-1 per sample on the dt grid),
// exponential waiting times with mean 1/gamma. Deterministic given
// (master_seed, fluct.rng_stream_id).
std::vector<int> fluctuator_path(const Fluctuator& fluct, std::uint64_t master_seed,
                                 double duration_s, double dt_s);

// Sum of dispersive shifts g^2 sigma_z / (mode_f - f_TLS) over all
// non-saturated defects. instantaneous_f_tls holds one frequency per
// defect; detunings inside guard_hz/2 are clamped in magnitude.
double dispersive_shift(double mode_f, const TlsEnsemble& ensemble,
                        std::span<const double> instantaneous_f_tls,
                        double guard_hz);

// Poisson burst schedule over [0, duration).
std::vector<BurstEvent> sample_burst_schedule(const BurstScheduleConfig& cfg,
                                              double duration_s,
                                              std::uint64_t master_seed);

// Frequency contribution of one event to mode k (1-based, k in 1..n_modes)
// at time t. Zero before onset; exponential relaxation after.
double burst_contribution(const BurstEvent& event, int mode_index, int n_modes,
                          double t_s);

// Full synthesis: spectral-diffusion shifts relative to t = 0, plus burst
// contributions and an optional white noise floor. Deterministic for a
// given (cfg, seed) regardless of sim.workers.
TimeTraceSet simulate_trace_set(const BathConfig& cfg, const SimulationConfig& sim,
                                std::span<const BurstEvent> bursts);

// Reflection samples at fixed probe tones (each mode probed at its fitted
// f_r) for the frequency-deviation traces.
std::vector<std::vector<Complex>> render_s11_traces(
    const TimeTraceSet& traces, std::span<const ResonatorParams> mode_params);

std::string to_string(BurstClass c);
BurstClass burst_class_from_string(const std::string& s);

} // namespace sawnoise

#endif
