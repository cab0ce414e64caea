#include "sawnoise/csv_io.hpp"
#include "sawnoise/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace sawnoise;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::vector<double> quiet_window;  // [start, end] seconds when given
};

RunConfig effective_config(const GlobalArgs& g)
{
    RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
    if (!g.quiet_window.empty()) {
        cfg.analysis.quiet_auto = false;
        cfg.analysis.quiet_start_s = g.quiet_window[0];
        cfg.analysis.quiet_end_s = g.quiet_window[1];
    }
    cfg.bath.mode_frequencies = cfg.resonator.mode_frequencies();
    cfg.validate();
    return cfg;
}

int cmd_simulate(const GlobalArgs& g)
{
    const RunConfig cfg = effective_config(g);
    RunConfig eff = cfg;
    eff.bath.master_seed = g.seed;
    std::vector<BurstEvent> events;
    if (eff.bursts_enabled && eff.bursts.rate_hz > 0.0)
        events = sample_burst_schedule(eff.bursts, eff.simulation.duration_s, g.seed);
    const auto traces = simulate_trace_set(eff.bath, eff.simulation, events);
    fs::create_directories(g.out_dir);
    io::write_traces(fs::path(g.out_dir) / "traces.csv", traces);
    io::write_burst_schedule(fs::path(g.out_dir) / "bursts_injected.csv", events);
    std::cout << "wrote " << g.out_dir << "/traces.csv (" << traces.n_modes()
              << " modes, " << traces.n_samples() << " samples)\n";
    return 0;
}

int cmd_fit_resonance(const GlobalArgs& g, const std::string& sweep_path)
{
    const auto sweep = io::read_sweep(sweep_path);
    const auto result = fit_resonance(sweep, initial_guess(sweep));
    if (!result.converged) {
        std::cerr << "error in stage fit-resonance: fit did not converge after "
                  << result.iterations << " iterations\n";
        return 1;
    }
    fs::create_directories(g.out_dir);
    const auto out = fs::path(g.out_dir) / "resonator_params.txt";
    io::write_resonator_params(out, result.params);
    std::cout << "wrote " << out.string() << " (residual "
              << io::format_double(result.residual_norm) << ")\n";
    return 0;
}

int cmd_extract(const GlobalArgs& g, const std::string& params_path,
                const std::string& samples_path)
{
    const auto params = io::read_resonator_params(params_path);
    // Each input row is one reflection sample taken at the probe tone in
    // its freq_hz column.
    const auto samples = io::read_sweep(samples_path);
    fs::create_directories(g.out_dir);
    const auto out = fs::path(g.out_dir) / "extracted.csv";
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + out.string());
    f << "f_r_hz,consistency\n";
    for (std::size_t i = 0; i < samples.freq_hz.size(); ++i) {
        const auto fr = extract_frequency(samples.s11[i], samples.freq_hz[i], params);
        f << io::format_double(fr.f_r_hz) << ','
          << io::format_double(fr.consistency_residual) << '\n';
    }
    std::cout << "wrote " << out.string() << " (" << samples.freq_hz.size()
              << " samples)\n";
    return 0;
}

int cmd_analyze(const GlobalArgs& g)
{
    const RunConfig cfg = effective_config(g);
    const auto manifest = analyze_directory(cfg, g.out_dir);
    std::cout << "analyzed " << g.out_dir << " (" << manifest.artifacts.size()
              << " artifacts)\n";
    return 0;
}

int cmd_report(const GlobalArgs& g, const std::string& figure, double spacing)
{
    emit_plot_data(g.out_dir, figure, spacing);
    std::cout << "wrote plot data for '" << figure << "' in " << g.out_dir << "\n";
    return 0;
}

int cmd_pipeline(const GlobalArgs& g)
{
    const RunConfig cfg = effective_config(g);
    const auto manifest = run_pipeline(cfg, g.seed, g.out_dir);
    emit_plot_data(g.out_dir, "all");
    std::cout << "pipeline complete: " << manifest.artifacts.size()
              << " artifacts in " << g.out_dir << " ("
              << io::format_double(manifest.wall_seconds) << " s)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multimode resonator frequency-noise simulator and analyzer"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs g;
    app.add_option("--config", g.config_path, "Run configuration file");
    app.add_option("--seed", g.seed, "Master RNG seed");
    app.add_option("--out", g.out_dir, "Output directory");
    app.add_option("--quiet-window", g.quiet_window,
                   "Manual quiet window START END (seconds)")
        ->expected(2);

    app.add_subcommand("simulate", "Synthesize frequency-deviation traces");

    std::string sweep_path;
    auto* fitres = app.add_subcommand("fit-resonance",
                                      "Fit the reflection model to a sweep CSV");
    fitres->add_option("sweep", sweep_path, "Input sweep CSV (freq_hz,re,im)")
        ->required();

    std::string params_path, samples_path;
    auto* extract = app.add_subcommand(
        "extract", "Invert reflection samples to resonance frequencies");
    extract->add_option("--params", params_path, "Fitted resonator parameter file")
        ->required();
    extract->add_option("samples", samples_path, "Reflection samples CSV")
        ->required();

    app.add_subcommand("analyze", "Run the analysis stages on existing traces");

    std::string figure = "all";
    double spacing = 0.0;
    auto* report = app.add_subcommand("report", "Emit gnuplot data and scripts");
    report->add_option("--figure", figure, "traces, correlation, psd, adev or all");
    report->add_option("--waterfall-spacing", spacing,
                       "Vertical offset between modes (Hz)");

    app.add_subcommand("pipeline", "Simulate, analyze and report in one run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("simulate")) return cmd_simulate(g);
        if (app.got_subcommand("fit-resonance")) return cmd_fit_resonance(g, sweep_path);
        if (app.got_subcommand("extract"))
            return cmd_extract(g, params_path, samples_path);
        if (app.got_subcommand("analyze")) return cmd_analyze(g);
        if (app.got_subcommand("report")) return cmd_report(g, figure, spacing);
        if (app.got_subcommand("pipeline")) return cmd_pipeline(g);
    } catch (const PipelineError& e) {
        std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
