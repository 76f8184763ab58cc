#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cascade/analysis.hpp"
#include "cascade/polarization.hpp"
#include "cascade/quantum.hpp"
#include "cascade/simulation.hpp"
#include "cascade/tomography.hpp"

namespace cascade {

using Json = nlohmann::ordered_json;

struct CorrectionSettings {
  CorrectionUnitary unitary;
  CorrectionArms arms = CorrectionArms::kBoth;
};

struct TomographySettings {
  int basis_count = 36;
  double bin_width_ps = 100.0;
  double max_delay_ps = 6000.0;  // coincidence window [0, max_delay) of t_X - t_XX
  std::uint64_t min_counts_per_bin = 100;
  int bootstrap_samples = 0;
  Likelihood likelihood = Likelihood::kGaussian;
  CircularConvention circular_convention = CircularConvention::kRMinusI;
  std::optional<CorrectionSettings> correction;
};

enum class SimulationMode { kProjection, kAutocorrelation };

struct SimulationSettings {
  std::uint64_t n_pulses = 0;
  std::uint64_t seed = 0;
  SimulationMode mode = SimulationMode::kProjection;
  Species species = Species::kX;
};

struct IoSettings {
  std::string output_dir = "out";
  std::vector<std::string> formats = {"binary"};
  bool truth = false;
};

struct RunConfig {
  EmitterConfig emitter;
  TomographySettings tomography;
  std::optional<SimulationSettings> simulation;
  IoSettings io;

  void validate() const;
};

inline constexpr const char* kSeedEnvVar = "CASCADE_TOMO_SEED";

// Applies `a.b.c=value` overrides; the value is parsed as JSON when
// possible, otherwise taken as a string.
void apply_overrides(Json& config, const std::vector<std::string>& overrides);

RunConfig run_config_from_json(const Json& j);
Json to_json(const RunConfig& c);

// Reads the file, applies overrides, then the seed environment variable.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
// Environment seed override applied to an already built config.
void apply_seed_env(RunConfig& config);

Json to_json(const EmitterConfig& c);
EmitterConfig emitter_from_json(const Json& j);

// {"re": 4x4, "im": 4x4}, row-major, basis order (HH, HV, VH, VV).
Json to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const Json& j);

// {model, params, std_errors, reduced_chi2, converged}
Json to_json(const FitResult& fit);
Json to_json(const G2Result& g2);

// Rounds to 12 significant digits; used for report stability.
double round12(double v);
// Recursively applies round12 to every floating-point number.
Json rounded(const Json& j);

}  // namespace cascade
