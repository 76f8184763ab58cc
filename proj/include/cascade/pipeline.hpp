#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cascade/config.hpp"

namespace cascade {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct ManifestEntry {
  std::string basis;  // two-letter pair, empty for autocorrelation runs
  std::string arm;    // "xx" / "x" for projections, "a" / "b" for autocorrelation
  std::string path;   // relative to the manifest directory
  std::uint64_t records = 0;
  std::string fnv1a64;
};

struct Manifest {
  std::string mode;  // "projection" | "autocorrelation"
  Json config;
  std::vector<ManifestEntry> files;
};

Json to_json(const Manifest& m);
Manifest manifest_from_json(const Json& j);
Manifest read_manifest(const std::filesystem::path& path);

std::string fnv1a64_hex(const std::filesystem::path& file);

// Simulates one stream pair per basis pair (or one autocorrelation pair) and
// writes them with a manifest.json into config.io.output_dir.
Manifest cmd_simulate(const RunConfig& config);

// Coincidence histograms of t_X - t_XX over [0, max_delay) from a projection manifest.
HistogramSet coincidence_histograms(const Manifest& manifest, const std::filesystem::path& manifest_dir,
                                    double bin_width_ps, double max_delay_ps);

// CSV `basis,bin_start_ps,counts`.
HistogramSet read_binned_csv(std::istream& is);

struct BinMetrics {
  TimeBin bin;
  std::uint64_t total_counts = 0;
  bool skipped = false;
  DensityMatrix rho;
  double fidelity = 0.0;
  double concurrence = 0.0;
  std::optional<double> fidelity_std;
  std::optional<double> concurrence_std;
  bool converged = false;
};

struct TomographyReport {
  std::vector<BinMetrics> bins;
  std::optional<FitResult> oscillation;  // sinusoid fit of fidelity vs time
  Json config;
};

// Runs per-bin reconstruction, the optional correction and bootstrap on
// already split inputs.
TomographyReport analyze_inputs(const std::vector<TomographyInput>& inputs, const RunConfig& config);
TomographyReport analyze_histograms(const HistogramSet& histograms, const RunConfig& config);

Json report_json(const TomographyReport& report, const std::vector<std::string>& outputs);

// Writes report.json, fidelity_vs_time.csv and rho/ files; returns the report JSON.
Json write_tomography_outputs(const TomographyReport& report, const std::filesystem::path& out_dir);

enum class TomoSource { kManifest, kCounts, kBinned };

Json cmd_tomo(const std::filesystem::path& input, TomoSource source, const RunConfig& config);

// Human-readable summary of a report JSON.
std::string render_report(const Json& report);

}  // namespace cascade
