#ifndef SAWNOISE_CONFIG_HPP
#define SAWNOISE_CONFIG_HPP

#include "sawnoise/noise_analysis.hpp"
#include "sawnoise/resonator.hpp"
#include "sawnoise/tls_bath.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sawnoise {

// The [resonator] config section. Per-mode responses are generated from a
// shared template on an evenly spaced comb.
struct ResonatorConfig {
    bool generate_defaults = true;
    double f_start_hz = 2.371e9;
    double mode_spacing_hz = 2e6;
    std::size_t n_modes = 14;
    double q_loaded = 1.2e5;
    double q_external = 2.4e5;
    double amplitude_scale = 1.0;
    double cable_phase = 0.0;
    double phi0_rad = 0.0;

    std::vector<double> mode_frequencies() const;
    std::vector<ResonatorParams> mode_params() const;
};

struct AnalysisConfig {
    std::size_t welch_segment = 0;   // 0: trace/8 rounded to a power of two
    double welch_overlap = 0.5;
    SpectralWindow welch_window = SpectralWindow::hann;
    std::size_t adev_points = 30;
    double correlation_bin_hz = 2e6;
    bool quiet_auto = true;          // otherwise [quiet_start_s, quiet_end_s)
    double quiet_start_s = 0.0;
    double quiet_end_s = 0.0;
    double burst_threshold = 8.0;
    double psd_fit_f_lo_hz = 0.0;    // 0: no lower cut beyond f > 0
    double psd_fit_f_hi_hz = 0.0;    // 0: up to Nyquist
};

struct RunConfig {
    BathConfig bath;
    ResonatorConfig resonator;
    SimulationConfig simulation;
    bool bursts_enabled = true;
    BurstScheduleConfig bursts;
    AnalysisConfig analysis;
    std::string output_dir = "out";

    // Throws std::invalid_argument naming `section.key` on bad values.
    void validate() const;
};

// Strict `[section]` / `key=value` parser. Unknown sections or keys and
// malformed values raise errors naming the key and line number.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");

// Canonical round-trippable rendering of the effective configuration;
// used for the manifest snapshot.
std::string serialize_config(const RunConfig& cfg);

} // namespace sawnoise

#endif
