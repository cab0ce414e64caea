#include "sawnoise/pipeline.hpp"

#include "sawnoise/csv_io.hpp"
#include "sawnoise/sha256.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace sawnoise {

namespace {

// Segment length for Welch when not pinned by config: trace/8 rounded to
// the nearest power of two (log scale), clamped to [16, trace length].
std::size_t auto_segment(std::size_t n_samples)
{
    const double target = std::max(16.0, static_cast<double>(n_samples) / 8.0);
    std::size_t p = 16;
    while (2 * p <= n_samples &&
           std::abs(std::log2(static_cast<double>(2 * p)) - std::log2(target)) <
               std::abs(std::log2(static_cast<double>(p)) - std::log2(target)))
        p *= 2;
    return p;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    return f;
}

std::span<const double> window_span(const std::vector<double>& v, SampleRange r)
{
    return std::span<const double>(v).subspan(r.begin, r.size());
}

} // namespace

SampleRange longest_quiet_gap(const std::vector<DetectedBurst>& bursts,
                              std::size_t n_samples, double dt_s, double pad_s)
{
    if (bursts.empty()) return {0, n_samples};
    std::vector<std::size_t> onsets;
    for (const auto& b : bursts) onsets.push_back(b.onset_index);
    std::sort(onsets.begin(), onsets.end());
    const auto pad = static_cast<std::size_t>(std::ceil(pad_s / dt_s));
    SampleRange best{0, std::min(onsets.front(), n_samples)};
    for (std::size_t i = 0; i < onsets.size(); ++i) {
        const std::size_t lo = std::min(onsets[i] + pad, n_samples);
        const std::size_t hi =
            i + 1 < onsets.size() ? std::min(onsets[i + 1], n_samples) : n_samples;
        if (hi > lo && hi - lo > best.size()) best = {lo, hi};
    }
    return best;
}

namespace {

// Shared stage runner: everything after simulation. `stage` is updated in
// place so the caller can tag failures.
void analysis_stages(const RunConfig& eff, const TimeTraceSet& traces,
                     const fs::path& out_dir, RunManifest& m, std::string& stage)
{
    auto add = [&](const std::string& name) {
        m.artifacts.emplace_back(name, sha256_file(out_dir / name));
    };
    {
        stage = "detect-bursts";
        BurstDetectionOptions bopt;
        bopt.threshold = eff.analysis.burst_threshold;
        const auto detected = detect_bursts(traces, bopt);
        io::write_detected_bursts(out_dir / "bursts_detected.csv", detected,
                                  traces.dt_s);
        add("bursts_detected.csv");

        stage = "quiet-window";
        const std::size_t n = traces.n_samples();
        const SampleRange full{0, n};
        SampleRange quiet;
        if (eff.analysis.quiet_auto) {
            quiet = longest_quiet_gap(detected, n, traces.dt_s);
        } else {
            const auto lo = static_cast<std::size_t>(
                std::llround(eff.analysis.quiet_start_s / traces.dt_s));
            const auto hi = static_cast<std::size_t>(
                std::llround(eff.analysis.quiet_end_s / traces.dt_s));
            quiet = {std::min(lo, n), std::min(hi, n)};
        }
        if (quiet.end <= quiet.begin || quiet.size() < 32)
            throw std::runtime_error("quiet window shorter than 32 samples");

        stage = "correlation";
        const auto corr_full = correlation_matrix(traces, full);
        io::write_correlation(out_dir / "corr_full.csv", corr_full);
        add("corr_full.csv");
        const auto corr_quiet = correlation_matrix(traces, quiet);
        io::write_correlation(out_dir / "corr_quiet.csv", corr_quiet);
        add("corr_quiet.csv");
        io::write_detuning_curve(
            out_dir / "corrdet_full.csv",
            correlation_vs_detuning(corr_full, eff.analysis.correlation_bin_hz));
        add("corrdet_full.csv");
        io::write_detuning_curve(
            out_dir / "corrdet_quiet.csv",
            correlation_vs_detuning(corr_quiet, eff.analysis.correlation_bin_hz));
        add("corrdet_quiet.csv");

        // A central mode stands in for the band in the scalar estimators.
        const std::size_t mode = traces.n_modes() / 2;
        const auto& trace = traces.deviations[mode];

        stage = "psd";
        auto run_psd = [&](SampleRange r, const std::string& tag) {
            const std::size_t seg = eff.analysis.welch_segment
                                        ? eff.analysis.welch_segment
                                        : auto_segment(r.size());
            const auto psd =
                welch_psd(window_span(trace, r), traces.dt_s, seg,
                          eff.analysis.welch_overlap, eff.analysis.welch_window);
            io::write_psd(out_dir / ("psd_" + tag + ".csv"), psd);
            add("psd_" + tag + ".csv");
            const double f_lo = eff.analysis.psd_fit_f_lo_hz > 0.0
                                    ? eff.analysis.psd_fit_f_lo_hz
                                    : psd.freq_hz.front();
            const double f_hi = eff.analysis.psd_fit_f_hi_hz > 0.0
                                    ? eff.analysis.psd_fit_f_hi_hz
                                    : psd.freq_hz.back();
            const auto fit = fit_noise_model(psd, ActiveComponents{}, f_lo, f_hi);
            io::write_fit_report(out_dir / ("fit_psd_" + tag + ".txt"), fit);
            add("fit_psd_" + tag + ".txt");
        };
        run_psd(full, "full");
        run_psd(quiet, "quiet");

        stage = "adev";
        const double span_s = static_cast<double>(n - 1) * traces.dt_s;
        const auto taus =
            default_tau_grid(traces.dt_s, span_s / 3.0, eff.analysis.adev_points);
        const auto adev = allan_deviation(trace, traces.dt_s, taus);
        io::write_adev(out_dir / "adev_full.csv", adev);
        add("adev_full.csv");
        const auto afit = fit_adev_model(adev, ActiveComponents{});
        io::write_fit_report(out_dir / "fit_adev_full.txt", afit);
        add("fit_adev_full.txt");
    }
}

} // namespace

RunManifest run_pipeline(const RunConfig& cfg, std::uint64_t seed,
                         const fs::path& out_dir)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    RunConfig eff = cfg;
    eff.bath.master_seed = seed;
    eff.bath.mode_frequencies = eff.resonator.mode_frequencies();

    RunManifest m;
    m.master_seed = seed;
    m.config_text = serialize_config(eff);

    fs::create_directories(out_dir);
    std::string stage = "setup";
    try {
        stage = "simulate";
        std::vector<BurstEvent> events;
        if (eff.bursts_enabled && eff.bursts.rate_hz > 0.0)
            events = sample_burst_schedule(eff.bursts, eff.simulation.duration_s, seed);
        const TimeTraceSet traces =
            simulate_trace_set(eff.bath, eff.simulation, events);
        io::write_traces(out_dir / "traces.csv", traces);
        m.artifacts.emplace_back("traces.csv", sha256_file(out_dir / "traces.csv"));
        io::write_burst_schedule(out_dir / "bursts_injected.csv", events);
        m.artifacts.emplace_back("bursts_injected.csv",
                                 sha256_file(out_dir / "bursts_injected.csv"));

        analysis_stages(eff, traces, out_dir, m, stage);
    } catch (const std::exception& e) {
        m.partial = true;
        m.failed_stage = stage;
        m.wall_seconds = elapsed();
        write_manifest(out_dir / "manifest.txt", m);
        throw PipelineError(stage, e.what());
    }

    m.wall_seconds = elapsed();
    write_manifest(out_dir / "manifest.txt", m);
    return m;
}

RunManifest analyze_directory(const RunConfig& cfg, const fs::path& out_dir)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    RunConfig eff = cfg;
    eff.bath.mode_frequencies = eff.resonator.mode_frequencies();

    RunManifest m;
    m.config_text = serialize_config(eff);

    std::string stage = "load-traces";
    try {
        const auto traces = io::read_traces(out_dir / "traces.csv");
        m.master_seed = traces.master_seed;
        m.artifacts.emplace_back("traces.csv", sha256_file(out_dir / "traces.csv"));
        analysis_stages(eff, traces, out_dir, m, stage);
    } catch (const std::exception& e) {
        m.partial = true;
        m.failed_stage = stage;
        m.wall_seconds = elapsed();
        write_manifest(out_dir / "manifest.txt", m);
        throw PipelineError(stage, e.what());
    }

    m.wall_seconds = elapsed();
    write_manifest(out_dir / "manifest.txt", m);
    return m;
}

void write_manifest(const fs::path& path, const RunManifest& m)
{
    auto f = open_out(path);
    f << "version=" << m.tool_version << '\n'
      << "seed=" << m.master_seed << '\n'
      << "partial=" << (m.partial ? "true" : "false") << '\n'
      << "failed_stage=" << m.failed_stage << '\n'
      << "wall_seconds=" << io::format_double(m.wall_seconds) << '\n'
      << "[artifacts]\n";
    for (const auto& [name, sum] : m.artifacts) f << name << '=' << sum << '\n';
    f << "[config]\n" << m.config_text;
}

RunManifest read_manifest(const fs::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open manifest: " + path.string());
    RunManifest m;
    std::string line;
    enum { head, artifacts, config } part = head;
    std::ostringstream cfg;
    while (std::getline(f, line)) {
        if (part != config) {
            if (line == "[artifacts]") {
                part = artifacts;
                continue;
            }
            if (line == "[config]") {
                part = config;
                continue;
            }
        }
        if (part == config) {
            cfg << line << '\n';
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (part == artifacts) {
            m.artifacts.emplace_back(key, value);
        } else if (key == "version") {
            m.tool_version = value;
        } else if (key == "seed") {
            m.master_seed = std::stoull(value);
        } else if (key == "partial") {
            m.partial = value == "true";
        } else if (key == "failed_stage") {
            m.failed_stage = value;
        } else if (key == "wall_seconds") {
            m.wall_seconds = std::stod(value);
        }
    }
    m.config_text = cfg.str();
    return m;
}

namespace {

void require_artifact(const fs::path& p)
{
    if (!fs::exists(p))
        throw std::runtime_error("plot: missing artifact " + p.string());
}

void emit_traces_figure(const fs::path& dir, double spacing)
{
    require_artifact(dir / "traces.csv");
    const auto traces = io::read_traces(dir / "traces.csv");
    if (spacing <= 0.0) {
        // Default spacing: twice the largest absolute excursion.
        double spread = 1.0;
        for (const auto& mode : traces.deviations)
            for (double v : mode) spread = std::max(spread, std::abs(v));
        spacing = 2.0 * spread;
    }
    auto dat = open_out(dir / "plot_traces.dat");
    for (std::size_t i = 0; i < traces.n_samples(); ++i) {
        dat << io::format_double(traces.start_time_s +
                                 static_cast<double>(i) * traces.dt_s);
        for (std::size_t k = 0; k < traces.n_modes(); ++k)
            dat << ' '
                << io::format_double(traces.deviations[k][i] +
                                     static_cast<double>(k) * spacing);
        dat << '\n';
    }
    auto gp = open_out(dir / "plot_traces.gp");
    gp << "set xlabel 'time (s)'\n"
       << "set ylabel 'frequency deviation + offset (Hz)'\n"
       << "plot for [k=2:" << traces.n_modes() + 1
       << "] 'plot_traces.dat' using 1:k with lines notitle\n";
}

void emit_correlation_figure(const fs::path& dir)
{
    require_artifact(dir / "corr_full.csv");
    const auto c = io::read_correlation(dir / "corr_full.csv");
    auto dat = open_out(dir / "plot_correlation.dat");
    for (std::size_t i = 0; i < c.n_modes; ++i) {
        for (std::size_t j = 0; j < c.n_modes; ++j)
            dat << i + 1 << ' ' << j + 1 << ' ' << io::format_double(c.at(i, j))
                << '\n';
        dat << '\n';
    }
    auto gp = open_out(dir / "plot_correlation.gp");
    gp << "set xlabel 'mode i'\nset ylabel 'mode j'\n"
       << "set cbrange [-1:1]\nset view map\n"
       << "splot 'plot_correlation.dat' using 1:2:3 with image notitle\n";
}

void emit_psd_figure(const fs::path& dir)
{
    require_artifact(dir / "psd_full.csv");
    require_artifact(dir / "fit_psd_full.txt");
    const auto psd = io::read_psd(dir / "psd_full.csv");
    const auto fit = io::read_fit_report(dir / "fit_psd_full.txt");
    auto dat = open_out(dir / "plot_psd.dat");
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i)
        dat << io::format_double(psd.freq_hz[i]) << ' '
            << io::format_double(psd.psd_hz2_per_hz[i]) << ' '
            << io::format_double(psd_model(psd.freq_hz[i], fit)) << '\n';
    auto gp = open_out(dir / "plot_psd.gp");
    gp << "set logscale xy\nset xlabel 'frequency (Hz)'\n"
       << "set ylabel 'S_f (Hz^2/Hz)'\n"
       << "plot 'plot_psd.dat' using 1:2 with lines title 'measured', \\\n"
       << "     'plot_psd.dat' using 1:3 with lines title 'model'\n";
}

void emit_adev_figure(const fs::path& dir)
{
    require_artifact(dir / "adev_full.csv");
    require_artifact(dir / "fit_adev_full.txt");
    const auto adev = io::read_adev(dir / "adev_full.csv");
    const auto fit = io::read_fit_report(dir / "fit_adev_full.txt");
    auto dat = open_out(dir / "plot_adev.dat");
    for (std::size_t i = 0; i < adev.tau_s.size(); ++i)
        dat << io::format_double(adev.tau_s[i]) << ' '
            << io::format_double(adev.sigma_hz[i]) << ' '
            << io::format_double(adev_model(adev.tau_s[i], fit)) << '\n';
    auto gp = open_out(dir / "plot_adev.gp");
    gp << "set logscale xy\nset xlabel 'tau (s)'\nset ylabel 'sigma_f (Hz)'\n"
       << "plot 'plot_adev.dat' using 1:2 with linespoints title 'measured', \\\n"
       << "     'plot_adev.dat' using 1:3 with lines title 'model'\n";
}

} // namespace

void emit_plot_data(const fs::path& out_dir, const std::string& figure,
                    double waterfall_spacing_hz)
{
    bool any = false;
    if (figure == "traces" || figure == "all")
        emit_traces_figure(out_dir, waterfall_spacing_hz), any = true;
    if (figure == "correlation" || figure == "all")
        emit_correlation_figure(out_dir), any = true;
    if (figure == "psd" || figure == "all") emit_psd_figure(out_dir), any = true;
    if (figure == "adev" || figure == "all") emit_adev_figure(out_dir), any = true;
    if (!any)
        throw std::runtime_error(
            "plot: unknown figure '" + figure +
            "' (expected traces, correlation, psd, adev or all)");
}

} // namespace sawnoise
