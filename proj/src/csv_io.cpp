#include "sawnoise/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sawnoise::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream f(path, std::ios::binary);  // binary: LF endings everywhere
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    return f;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
    return f;
}

double parse_double(const std::string& s, const std::string& context)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("bad number '" + s + "' in " + context);
    }
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    return out;
}

} // namespace

std::string format_double(double v)
{
    // Shortest representation that parses back to the same double, so
    // re-analyzing written traces reproduces in-memory results exactly.
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_sweep(const std::filesystem::path& path, const ComplexSweep& sweep)
{
    auto f = open_out(path);
    f << "freq_hz,re,im\n";
    for (std::size_t i = 0; i < sweep.freq_hz.size(); ++i)
        f << format_double(sweep.freq_hz[i]) << ',' << format_double(sweep.s11[i].real())
          << ',' << format_double(sweep.s11[i].imag()) << '\n';
}

ComplexSweep read_sweep(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("freq_hz,re,im", 0) != 0)
        throw std::runtime_error("sweep file missing 'freq_hz,re,im' header: " +
                                 path.string());
    ComplexSweep out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 3)
            throw std::runtime_error("sweep row needs 3 columns: " + line);
        out.freq_hz.push_back(parse_double(cols[0], path.string()));
        out.s11.emplace_back(parse_double(cols[1], path.string()),
                             parse_double(cols[2], path.string()));
    }
    return out;
}

void write_resonator_params(const std::filesystem::path& path,
                            const ResonatorParams& p)
{
    auto f = open_out(path);
    f << "a=" << format_double(p.amplitude_scale) << '\n'
      << "theta_rad=" << format_double(p.cable_phase) << '\n'
      << "q_loaded=" << format_double(p.loaded_q) << '\n'
      << "q_external=" << format_double(p.external_q) << '\n'
      << "phi0_rad=" << format_double(p.impedance_mismatch) << '\n'
      << "f_r_hz=" << format_double(p.resonance_freq) << '\n';
}

ResonatorParams read_resonator_params(const std::filesystem::path& path)
{
    const auto kv = read_key_values(path);
    auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(std::string("missing key '") + key + "' in " +
                                     path.string());
        return parse_double(it->second, path.string());
    };
    ResonatorParams p;
    p.amplitude_scale = get("a");
    p.cable_phase = get("theta_rad");
    p.loaded_q = get("q_loaded");
    p.external_q = get("q_external");
    p.impedance_mismatch = get("phi0_rad");
    p.resonance_freq = get("f_r_hz");
    return p;
}

void write_traces(const std::filesystem::path& path, const TimeTraceSet& traces)
{
    auto f = open_out(path);
    f << "# dt_s=" << format_double(traces.dt_s) << '\n';
    f << "# mode_freq_hz=";
    for (std::size_t k = 0; k < traces.mode_frequencies.size(); ++k)
        f << (k ? "," : "") << format_double(traces.mode_frequencies[k]);
    f << '\n';
    f << "# seed=" << traces.master_seed << '\n';
    f << "time_s";
    for (std::size_t k = 0; k < traces.n_modes(); ++k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), ",mode_%02zu", k + 1);
        f << buf;
    }
    f << '\n';
    for (std::size_t n = 0; n < traces.n_samples(); ++n) {
        f << format_double(traces.start_time_s + static_cast<double>(n) * traces.dt_s);
        for (std::size_t k = 0; k < traces.n_modes(); ++k)
            f << ',' << format_double(traces.deviations[k][n]);
        f << '\n';
    }
}

TimeTraceSet read_traces(const std::filesystem::path& path)
{
    auto f = open_in(path);
    TimeTraceSet out;
    std::string line;
    bool have_dt = false;
    while (std::getline(f, line)) {
        if (line.rfind("# dt_s=", 0) == 0) {
            out.dt_s = parse_double(line.substr(7), path.string());
            have_dt = true;
        } else if (line.rfind("# mode_freq_hz=", 0) == 0) {
            for (const auto& tok : split(line.substr(15), ','))
                out.mode_frequencies.push_back(parse_double(tok, path.string()));
        } else if (line.rfind("# seed=", 0) == 0) {
            out.master_seed = std::stoull(line.substr(7));
        } else if (line.rfind("time_s", 0) == 0) {
            break;
        } else if (!line.empty() && line[0] != '#') {
            throw std::runtime_error("unexpected line before trace header: " + line);
        }
    }
    if (!have_dt || out.mode_frequencies.empty())
        throw std::runtime_error("trace file missing dt_s/mode_freq_hz headers: " +
                                 path.string());
    out.deviations.assign(out.mode_frequencies.size(), {});
    bool first_row = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != out.mode_frequencies.size() + 1)
            throw std::runtime_error("trace row has wrong column count: " + line);
        if (first_row) {
            out.start_time_s = parse_double(cols[0], path.string());
            first_row = false;
        }
        for (std::size_t k = 0; k < out.mode_frequencies.size(); ++k)
            out.deviations[k].push_back(parse_double(cols[k + 1], path.string()));
    }
    return out;
}

void write_burst_schedule(const std::filesystem::path& path,
                          const std::vector<BurstEvent>& events)
{
    auto f = open_out(path);
    f << "onset_s,class,amplitude_hz,pivot,tau_s\n";
    for (const auto& e : events)
        f << format_double(e.onset_s) << ',' << to_string(e.event_class) << ','
          << format_double(e.peak_amplitude_hz) << ',' << format_double(e.pivot_mode)
          << ',' << format_double(e.relaxation_s) << '\n';
}

std::vector<BurstEvent> read_burst_schedule(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("onset_s,class", 0) != 0)
        throw std::runtime_error("burst schedule missing header: " + path.string());
    std::vector<BurstEvent> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 5)
            throw std::runtime_error("burst row needs 5 columns: " + line);
        BurstEvent e;
        e.onset_s = parse_double(cols[0], path.string());
        e.event_class = burst_class_from_string(cols[1]);
        e.peak_amplitude_hz = parse_double(cols[2], path.string());
        e.pivot_mode = parse_double(cols[3], path.string());
        e.relaxation_s = parse_double(cols[4], path.string());
        out.push_back(e);
    }
    return out;
}

void write_psd(const std::filesystem::path& path, const NoisePsd& psd)
{
    auto f = open_out(path);
    f << "freq_hz,psd_hz2_per_hz\n";
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i)
        f << format_double(psd.freq_hz[i]) << ','
          << format_double(psd.psd_hz2_per_hz[i]) << '\n';
}

NoisePsd read_psd(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("freq_hz,psd_hz2_per_hz", 0) != 0)
        throw std::runtime_error("psd file missing header: " + path.string());
    NoisePsd out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 2)
            throw std::runtime_error("psd row needs 2 columns: " + line);
        out.freq_hz.push_back(parse_double(cols[0], path.string()));
        out.psd_hz2_per_hz.push_back(parse_double(cols[1], path.string()));
    }
    return out;
}

void write_adev(const std::filesystem::path& path, const AdevCurve& curve)
{
    auto f = open_out(path);
    f << "tau_s,adev_hz\n";
    for (std::size_t i = 0; i < curve.tau_s.size(); ++i)
        f << format_double(curve.tau_s[i]) << ',' << format_double(curve.sigma_hz[i])
          << '\n';
}

AdevCurve read_adev(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("tau_s,adev_hz", 0) != 0)
        throw std::runtime_error("adev file missing header: " + path.string());
    AdevCurve out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 2)
            throw std::runtime_error("adev row needs 2 columns: " + line);
        out.tau_s.push_back(parse_double(cols[0], path.string()));
        out.sigma_hz.push_back(parse_double(cols[1], path.string()));
    }
    return out;
}

void write_correlation(const std::filesystem::path& path, const CorrelationMatrix& c)
{
    auto f = open_out(path);
    for (std::size_t k = 0; k < c.n_modes; ++k)
        f << (k ? "," : "") << format_double(c.mode_frequencies[k]);
    f << '\n';
    for (std::size_t i = 0; i < c.n_modes; ++i) {
        for (std::size_t j = 0; j < c.n_modes; ++j)
            f << (j ? "," : "") << format_double(c.at(i, j));
        f << '\n';
    }
}

CorrelationMatrix read_correlation(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error("empty correlation file: " + path.string());
    CorrelationMatrix out;
    for (const auto& tok : split(line, ','))
        out.mode_frequencies.push_back(parse_double(tok, path.string()));
    out.n_modes = out.mode_frequencies.size();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != out.n_modes)
            throw std::runtime_error("correlation row width mismatch: " + line);
        for (const auto& tok : cols)
            out.values.push_back(parse_double(tok, path.string()));
    }
    if (out.values.size() != out.n_modes * out.n_modes)
        throw std::runtime_error("correlation matrix is not square: " + path.string());
    return out;
}

void write_detuning_curve(const std::filesystem::path& path,
                          const std::vector<DetuningCurvePoint>& curve)
{
    auto f = open_out(path);
    f << "detuning_hz,mean_correlation,n_pairs\n";
    for (const auto& p : curve)
        f << format_double(p.mean_detuning_hz) << ','
          << format_double(p.mean_correlation) << ',' << p.n_pairs << '\n';
}

void write_fit_report(const std::filesystem::path& path, const NoiseModelFit& fit)
{
    auto f = open_out(path);
    f << "h_minus1_hz2=" << format_double(fit.h_minus1_hz2) << '\n'
      << "h0_hz2_per_hz=" << format_double(fit.h0_hz2_per_hz) << '\n'
      << "a_hz=" << format_double(fit.amplitude_hz) << '\n'
      << "tau0_s=" << format_double(fit.tau0_s) << '\n'
      << "residual=" << format_double(fit.residual_norm) << '\n'
      << "converged=" << (fit.converged ? "true" : "false") << '\n';
}

NoiseModelFit read_fit_report(const std::filesystem::path& path)
{
    const auto kv = read_key_values(path);
    auto get = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error(std::string("missing key '") + key + "' in " +
                                     path.string());
        return parse_double(it->second, path.string());
    };
    NoiseModelFit fit;
    fit.h_minus1_hz2 = get("h_minus1_hz2");
    fit.h0_hz2_per_hz = get("h0_hz2_per_hz");
    fit.amplitude_hz = get("a_hz");
    fit.tau0_s = get("tau0_s");
    fit.residual_norm = get("residual");
    const auto it = kv.find("converged");
    fit.converged = it != kv.end() && it->second == "true";
    fit.active.flicker = fit.h_minus1_hz2 != 0.0;
    fit.active.white = fit.h0_hz2_per_hz != 0.0;
    fit.active.lorentzian = fit.amplitude_hz != 0.0;
    return fit;
}

void write_detected_bursts(const std::filesystem::path& path,
                           const std::vector<DetectedBurst>& bursts, double dt_s)
{
    auto f = open_out(path);
    f << "onset_index,onset_s,score,fitted_tau_s,dominant_peak_hz\n";
    for (const auto& b : bursts) {
        double peak = 0.0;
        for (double p : b.peak_deviation_hz)
            if (std::abs(p) > std::abs(peak)) peak = p;
        f << b.onset_index << ','
          << format_double(static_cast<double>(b.onset_index) * dt_s) << ','
          << format_double(b.score) << ',' << format_double(b.fitted_relaxation_s)
          << ',' << format_double(peak) << '\n';
    }
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path)
{
    auto f = open_in(path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("expected key=value line in " + path.string() +
                                     ": " + line);
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

} // namespace sawnoise::io
