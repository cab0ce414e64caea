#include "sawnoise/config.hpp"

#include "sawnoise/csv_io.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sawnoise {

std::vector<double> ResonatorConfig::mode_frequencies() const
{
    std::vector<double> out(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k)
        out[k] = f_start_hz + static_cast<double>(k) * mode_spacing_hz;
    return out;
}

std::vector<ResonatorParams> ResonatorConfig::mode_params() const
{
    std::vector<ResonatorParams> out(n_modes);
    const auto freqs = mode_frequencies();
    for (std::size_t k = 0; k < n_modes; ++k) {
        out[k].amplitude_scale = amplitude_scale;
        out[k].cable_phase = cable_phase;
        out[k].loaded_q = q_loaded;
        out[k].external_q = q_external;
        out[k].impedance_mismatch = phi0_rad;
        out[k].resonance_freq = freqs[k];
    }
    return out;
}

void RunConfig::validate() const
{
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::invalid_argument("config: " + key + " " + why);
    };
    if (!(simulation.dt_s > 0.0)) fail("simulation.dt_s", "must be > 0");
    if (!(simulation.duration_s > 0.0)) fail("simulation.duration_s", "must be > 0");
    const double n = simulation.duration_s / simulation.dt_s;
    if (n > static_cast<double>(simulation.sample_cap))
        fail("simulation.duration_s",
             "duration/dt exceeds simulation.sample_cap");
    if (simulation.noise_floor_hz < 0.0)
        fail("simulation.noise_floor_hz", "must be >= 0");
    if (simulation.workers < 1) fail("simulation.workers", "must be >= 1");
    if (resonator.n_modes == 0) fail("resonator.n_modes", "must be >= 1");
    if (!(resonator.mode_spacing_hz > 0.0))
        fail("resonator.mode_spacing_hz", "must be > 0");
    if (bursts_enabled) {
        if (!(bursts.rate_hz >= 0.0)) fail("simulation.burst_rate_hz", "must be >= 0");
        if (bursts.uniform_sign_fraction < 0.0 || bursts.uniform_sign_fraction > 1.0)
            fail("simulation.uniform_sign_fraction", "must be in [0, 1]");
        if (!(bursts.amp_min_hz > 0.0) || bursts.amp_max_hz < bursts.amp_min_hz)
            fail("simulation.burst_amp_min_hz", "needs 0 < min <= max");
        if (!(bursts.tau_min_s > 0.0) || bursts.tau_max_s < bursts.tau_min_s)
            fail("simulation.burst_tau_min_s", "needs 0 < min <= max");
    }
    if (analysis.welch_overlap < 0.0 || analysis.welch_overlap >= 1.0)
        fail("analysis.welch_overlap", "must be in [0, 1)");
    if (!(analysis.correlation_bin_hz > 0.0))
        fail("analysis.correlation_bin_hz", "must be > 0");
    if (!analysis.quiet_auto && !(analysis.quiet_end_s > analysis.quiet_start_s))
        fail("analysis.quiet_end_s", "manual quiet window needs end > start");
    if (!(analysis.burst_threshold > 0.0))
        fail("analysis.burst_threshold", "must be > 0");
    if (output_dir.empty()) fail("output.directory", "must not be empty");
    BathConfig checked = bath;
    checked.mode_frequencies = resonator.mode_frequencies();
    checked.validate();
}

namespace {

struct Setter {
    std::function<void(RunConfig&, const std::string&)> apply;
};

[[noreturn]] void bad_value(const std::string& section, const std::string& key,
                            std::size_t line_no, const std::string& value)
{
    throw std::invalid_argument("config: bad value '" + value + "' for " + section +
                                "." + key + " at line " + std::to_string(line_no));
}

double to_double(const std::string& v)
{
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
}

std::size_t to_size(const std::string& v)
{
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(v);
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

using SetterMap = std::map<std::string, std::map<std::string, Setter>>;

const SetterMap& setters()
{
    static const SetterMap m = [] {
        SetterMap s;
        auto add = [&s](const char* sec, const char* key, auto fn) {
            s[sec][key] = Setter{fn};
        };
        add("bath", "n_tls",
            [](RunConfig& c, const std::string& v) { c.bath.n_tls = to_size(v); });
        add("bath", "band_low_hz",
            [](RunConfig& c, const std::string& v) { c.bath.band_low_hz = to_double(v); });
        add("bath", "band_high_hz",
            [](RunConfig& c, const std::string& v) { c.bath.band_high_hz = to_double(v); });
        add("bath", "g_min_hz",
            [](RunConfig& c, const std::string& v) { c.bath.g_min_hz = to_double(v); });
        add("bath", "g_max_hz",
            [](RunConfig& c, const std::string& v) { c.bath.g_max_hz = to_double(v); });
        add("bath", "g_exponent",
            [](RunConfig& c, const std::string& v) { c.bath.g_exponent = to_double(v); });
        add("bath", "n_fluctuators_per_tls", [](RunConfig& c, const std::string& v) {
            c.bath.n_fluctuators_per_tls = to_size(v);
        });
        add("bath", "gamma_min_hz",
            [](RunConfig& c, const std::string& v) { c.bath.gamma_min_hz = to_double(v); });
        add("bath", "gamma_max_hz",
            [](RunConfig& c, const std::string& v) { c.bath.gamma_max_hz = to_double(v); });
        add("bath", "d_scale_hz",
            [](RunConfig& c, const std::string& v) { c.bath.d_scale_hz = to_double(v); });
        add("bath", "guard_detuning_hz", [](RunConfig& c, const std::string& v) {
            c.bath.guard_detuning_hz = to_double(v);
        });

        add("resonator", "generate_defaults", [](RunConfig& c, const std::string& v) {
            c.resonator.generate_defaults = to_bool(v);
        });
        add("resonator", "f_start_hz", [](RunConfig& c, const std::string& v) {
            c.resonator.f_start_hz = to_double(v);
        });
        add("resonator", "mode_spacing_hz", [](RunConfig& c, const std::string& v) {
            c.resonator.mode_spacing_hz = to_double(v);
        });
        add("resonator", "n_modes", [](RunConfig& c, const std::string& v) {
            c.resonator.n_modes = to_size(v);
        });
        add("resonator", "q_loaded", [](RunConfig& c, const std::string& v) {
            c.resonator.q_loaded = to_double(v);
        });
        add("resonator", "q_external", [](RunConfig& c, const std::string& v) {
            c.resonator.q_external = to_double(v);
        });
        add("resonator", "a", [](RunConfig& c, const std::string& v) {
            c.resonator.amplitude_scale = to_double(v);
        });
        add("resonator", "theta_rad", [](RunConfig& c, const std::string& v) {
            c.resonator.cable_phase = to_double(v);
        });
        add("resonator", "phi0_rad", [](RunConfig& c, const std::string& v) {
            c.resonator.phi0_rad = to_double(v);
        });

        add("simulation", "duration_s", [](RunConfig& c, const std::string& v) {
            c.simulation.duration_s = to_double(v);
        });
        add("simulation", "dt_s", [](RunConfig& c, const std::string& v) {
            c.simulation.dt_s = to_double(v);
        });
        add("simulation", "noise_floor_hz", [](RunConfig& c, const std::string& v) {
            c.simulation.noise_floor_hz = to_double(v);
        });
        add("simulation", "sample_cap", [](RunConfig& c, const std::string& v) {
            c.simulation.sample_cap = to_size(v);
        });
        add("simulation", "workers", [](RunConfig& c, const std::string& v) {
            c.simulation.workers = static_cast<int>(to_size(v));
        });
        add("simulation", "bursts_enabled", [](RunConfig& c, const std::string& v) {
            c.bursts_enabled = to_bool(v);
        });
        add("simulation", "burst_rate_hz", [](RunConfig& c, const std::string& v) {
            c.bursts.rate_hz = to_double(v);
        });
        add("simulation", "uniform_sign_fraction", [](RunConfig& c, const std::string& v) {
            c.bursts.uniform_sign_fraction = to_double(v);
        });
        add("simulation", "burst_amp_min_hz", [](RunConfig& c, const std::string& v) {
            c.bursts.amp_min_hz = to_double(v);
        });
        add("simulation", "burst_amp_max_hz", [](RunConfig& c, const std::string& v) {
            c.bursts.amp_max_hz = to_double(v);
        });
        add("simulation", "burst_pivot_min", [](RunConfig& c, const std::string& v) {
            c.bursts.pivot_min = to_double(v);
        });
        add("simulation", "burst_pivot_max", [](RunConfig& c, const std::string& v) {
            c.bursts.pivot_max = to_double(v);
        });
        add("simulation", "burst_tau_min_s", [](RunConfig& c, const std::string& v) {
            c.bursts.tau_min_s = to_double(v);
        });
        add("simulation", "burst_tau_max_s", [](RunConfig& c, const std::string& v) {
            c.bursts.tau_max_s = to_double(v);
        });

        add("analysis", "welch_segment", [](RunConfig& c, const std::string& v) {
            c.analysis.welch_segment = to_size(v);
        });
        add("analysis", "welch_overlap", [](RunConfig& c, const std::string& v) {
            c.analysis.welch_overlap = to_double(v);
        });
        add("analysis", "welch_window", [](RunConfig& c, const std::string& v) {
            if (v == "hann")
                c.analysis.welch_window = SpectralWindow::hann;
            else if (v == "rectangular")
                c.analysis.welch_window = SpectralWindow::rectangular;
            else
                throw std::invalid_argument(v);
        });
        add("analysis", "adev_points", [](RunConfig& c, const std::string& v) {
            c.analysis.adev_points = to_size(v);
        });
        add("analysis", "correlation_bin_hz", [](RunConfig& c, const std::string& v) {
            c.analysis.correlation_bin_hz = to_double(v);
        });
        add("analysis", "quiet_window", [](RunConfig& c, const std::string& v) {
            if (v == "auto")
                c.analysis.quiet_auto = true;
            else if (v == "manual")
                c.analysis.quiet_auto = false;
            else
                throw std::invalid_argument(v);
        });
        add("analysis", "quiet_start_s", [](RunConfig& c, const std::string& v) {
            c.analysis.quiet_start_s = to_double(v);
        });
        add("analysis", "quiet_end_s", [](RunConfig& c, const std::string& v) {
            c.analysis.quiet_end_s = to_double(v);
        });
        add("analysis", "burst_threshold", [](RunConfig& c, const std::string& v) {
            c.analysis.burst_threshold = to_double(v);
        });
        add("analysis", "psd_fit_f_lo_hz", [](RunConfig& c, const std::string& v) {
            c.analysis.psd_fit_f_lo_hz = to_double(v);
        });
        add("analysis", "psd_fit_f_hi_hz", [](RunConfig& c, const std::string& v) {
            c.analysis.psd_fit_f_hi_hz = to_double(v);
        });

        add("output", "directory", [](RunConfig& c, const std::string& v) {
            c.output_dir = v;
        });
        return s;
    }();
    return m;
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& origin)
{
    RunConfig cfg;
    const auto& known = setters();
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::invalid_argument("config: malformed section header at " +
                                            origin + ":" + std::to_string(line_no));
            section = t.substr(1, t.size() - 2);
            if (!known.count(section))
                throw std::invalid_argument("config: unknown section [" + section +
                                            "] at " + origin + ":" +
                                            std::to_string(line_no));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value at " + origin +
                                        ":" + std::to_string(line_no));
        if (section.empty())
            throw std::invalid_argument("config: key before any [section] at " +
                                        origin + ":" + std::to_string(line_no));
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto& sec = known.at(section);
        const auto it = sec.find(key);
        if (it == sec.end())
            throw std::invalid_argument("config: unknown key " + section + "." + key +
                                        " at " + origin + ":" +
                                        std::to_string(line_no));
        try {
            it->second.apply(cfg, value);
        } catch (const std::exception&) {
            bad_value(section, key, line_no, value);
        }
    }
    cfg.bath.mode_frequencies = cfg.resonator.mode_frequencies();
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::invalid_argument("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string serialize_config(const RunConfig& c)
{
    using io::format_double;
    std::ostringstream o;
    o << "[bath]\n"
      << "n_tls=" << c.bath.n_tls << '\n'
      << "band_low_hz=" << format_double(c.bath.band_low_hz) << '\n'
      << "band_high_hz=" << format_double(c.bath.band_high_hz) << '\n'
      << "g_min_hz=" << format_double(c.bath.g_min_hz) << '\n'
      << "g_max_hz=" << format_double(c.bath.g_max_hz) << '\n'
      << "g_exponent=" << format_double(c.bath.g_exponent) << '\n'
      << "n_fluctuators_per_tls=" << c.bath.n_fluctuators_per_tls << '\n'
      << "gamma_min_hz=" << format_double(c.bath.gamma_min_hz) << '\n'
      << "gamma_max_hz=" << format_double(c.bath.gamma_max_hz) << '\n'
      << "d_scale_hz=" << format_double(c.bath.d_scale_hz) << '\n'
      << "guard_detuning_hz=" << format_double(c.bath.guard_detuning_hz) << '\n';
    o << "[resonator]\n"
      << "generate_defaults=" << (c.resonator.generate_defaults ? "true" : "false")
      << '\n'
      << "f_start_hz=" << format_double(c.resonator.f_start_hz) << '\n'
      << "mode_spacing_hz=" << format_double(c.resonator.mode_spacing_hz) << '\n'
      << "n_modes=" << c.resonator.n_modes << '\n'
      << "q_loaded=" << format_double(c.resonator.q_loaded) << '\n'
      << "q_external=" << format_double(c.resonator.q_external) << '\n'
      << "a=" << format_double(c.resonator.amplitude_scale) << '\n'
      << "theta_rad=" << format_double(c.resonator.cable_phase) << '\n'
      << "phi0_rad=" << format_double(c.resonator.phi0_rad) << '\n';
    o << "[simulation]\n"
      << "duration_s=" << format_double(c.simulation.duration_s) << '\n'
      << "dt_s=" << format_double(c.simulation.dt_s) << '\n'
      << "noise_floor_hz=" << format_double(c.simulation.noise_floor_hz) << '\n'
      << "sample_cap=" << c.simulation.sample_cap << '\n'
      << "workers=" << c.simulation.workers << '\n'
      << "bursts_enabled=" << (c.bursts_enabled ? "true" : "false") << '\n'
      << "burst_rate_hz=" << format_double(c.bursts.rate_hz) << '\n'
      << "uniform_sign_fraction=" << format_double(c.bursts.uniform_sign_fraction)
      << '\n'
      << "burst_amp_min_hz=" << format_double(c.bursts.amp_min_hz) << '\n'
      << "burst_amp_max_hz=" << format_double(c.bursts.amp_max_hz) << '\n'
      << "burst_pivot_min=" << format_double(c.bursts.pivot_min) << '\n'
      << "burst_pivot_max=" << format_double(c.bursts.pivot_max) << '\n'
      << "burst_tau_min_s=" << format_double(c.bursts.tau_min_s) << '\n'
      << "burst_tau_max_s=" << format_double(c.bursts.tau_max_s) << '\n';
    o << "[analysis]\n"
      << "welch_segment=" << c.analysis.welch_segment << '\n'
      << "welch_overlap=" << format_double(c.analysis.welch_overlap) << '\n'
      << "welch_window=" << window_name(c.analysis.welch_window) << '\n'
      << "adev_points=" << c.analysis.adev_points << '\n'
      << "correlation_bin_hz=" << format_double(c.analysis.correlation_bin_hz) << '\n'
      << "quiet_window=" << (c.analysis.quiet_auto ? "auto" : "manual") << '\n'
      << "quiet_start_s=" << format_double(c.analysis.quiet_start_s) << '\n'
      << "quiet_end_s=" << format_double(c.analysis.quiet_end_s) << '\n'
      << "burst_threshold=" << format_double(c.analysis.burst_threshold) << '\n'
      << "psd_fit_f_lo_hz=" << format_double(c.analysis.psd_fit_f_lo_hz) << '\n'
      << "psd_fit_f_hi_hz=" << format_double(c.analysis.psd_fit_f_hi_hz) << '\n';
    o << "[output]\n"
      << "directory=" << c.output_dir << '\n';
    return o.str();
}

} // namespace sawnoise
