#ifndef SAWNOISE_PIPELINE_HPP
#define SAWNOISE_PIPELINE_HPP

#include "sawnoise/config.hpp"
#include "sawnoise/noise_analysis.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sawnoise {

inline constexpr const char* kToolVersion = "sawnoise 1.0.0";

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::uint64_t master_seed = 0;
    bool partial = false;
    std::string failed_stage;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> artifacts;  // name, sha256
    std::string config_text;
};

// Stage-tagged pipeline failure; what() carries "stage: detail".
class PipelineError : public std::runtime_error
{
public:
    PipelineError(std::string stage, const std::string& detail)
        : std::runtime_error(stage + ": " + detail), stage_(std::move(stage))
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Runs simulate -> detect -> correlate -> psd -> adev and writes every
// artifact plus manifest.txt (always last) under out_dir. On a stage
// failure a partial manifest covering the artifacts written so far is
// still emitted, then PipelineError is thrown.
RunManifest run_pipeline(const RunConfig& cfg, std::uint64_t seed,
                         const std::filesystem::path& out_dir);

// Analysis stages only, over an existing out_dir/traces.csv.
RunManifest analyze_directory(const RunConfig& cfg,
                              const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

// Gnuplot data + script emission for a finished run directory.
// figure: "traces", "correlation", "psd", "adev" or "all". The waterfall
// offsets mode k by k * spacing; 0 picks a spacing from the data spread.
void emit_plot_data(const std::filesystem::path& out_dir, const std::string& figure,
                    double waterfall_spacing_hz = 0.0);

// Longest burst-free sample range, padded after each onset so relaxation
// tails decay out. Falls back to the full range when nothing was detected.
SampleRange longest_quiet_gap(const std::vector<DetectedBurst>& bursts,
                              std::size_t n_samples, double dt_s,
                              double pad_s = 60.0);

} // namespace sawnoise

#endif
