#ifndef SAWNOISE_CSV_IO_HPP
#define SAWNOISE_CSV_IO_HPP

#include "sawnoise/noise_analysis.hpp"
#include "sawnoise/resonator.hpp"
#include "sawnoise/tls_bath.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sawnoise::io {

// Sweep files: header `freq_hz,re,im`, >= 12 significant digits, LF endings.
void write_sweep(const std::filesystem::path& path, const ComplexSweep& sweep);
ComplexSweep read_sweep(const std::filesystem::path& path);

// Fitted parameters as `key=value` lines (a, theta_rad, q_loaded,
// q_external, phi0_rad, f_r_hz).
void write_resonator_params(const std::filesystem::path& path,
                            const ResonatorParams& params);
ResonatorParams read_resonator_params(const std::filesystem::path& path);

// Trace files: `# dt_s=`, `# mode_freq_hz=`, `# seed=` comment headers,
// then `time_s,mode_01,...` columns.
void write_traces(const std::filesystem::path& path, const TimeTraceSet& traces);
TimeTraceSet read_traces(const std::filesystem::path& path);

// Burst schedules: `onset_s,class,amplitude_hz,pivot,tau_s`.
void write_burst_schedule(const std::filesystem::path& path,
                          const std::vector<BurstEvent>& events);
std::vector<BurstEvent> read_burst_schedule(const std::filesystem::path& path);

void write_psd(const std::filesystem::path& path, const NoisePsd& psd);
NoisePsd read_psd(const std::filesystem::path& path);

void write_adev(const std::filesystem::path& path, const AdevCurve& curve);
AdevCurve read_adev(const std::filesystem::path& path);

// Correlation matrix CSV with the mode frequencies as the header row.
void write_correlation(const std::filesystem::path& path, const CorrelationMatrix& c);
CorrelationMatrix read_correlation(const std::filesystem::path& path);

void write_detuning_curve(const std::filesystem::path& path,
                          const std::vector<DetuningCurvePoint>& curve);

// Fit reports: key=value (h_minus1_hz2, h0_hz2_per_hz, a_hz, tau0_s,
// residual, converged).
void write_fit_report(const std::filesystem::path& path, const NoiseModelFit& fit);
NoiseModelFit read_fit_report(const std::filesystem::path& path);

void write_detected_bursts(const std::filesystem::path& path,
                           const std::vector<DetectedBurst>& bursts, double dt_s);

// Generic key=value reader (skips blank lines and '#' comments).
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

std::string format_double(double v);

} // namespace sawnoise::io

#endif
