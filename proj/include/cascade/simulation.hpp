#pragma once

#include <cstdint>
#include <vector>

#include "cascade/polarization.hpp"
#include "cascade/quantum.hpp"

namespace cascade {

// Physical parameters of the emitter and detection chain. Times in ps,
// energies in µeV, rates in MHz (laser) or counts/s (background).
struct EmitterConfig {
  double fss = 4.65;
  double tau_xx = 1100.0;
  double tau_x = 1610.0;
  double rep_rate = 80.0;
  double recapture_probability = 0.0;
  double recapture_time = 546.0;
  double setup_efficiency = 1.0;
  double detector_efficiency = 1.0;
  double background_rate = 0.0;
  double excitation_fraction = 1.0;
  double jitter_sigma = 0.0;  // Gaussian detector jitter, ps

  void validate() const;
  double rep_period_ps() const { return 1e6 / rep_rate; }
  double detection_efficiency() const { return setup_efficiency * detector_efficiency; }

  // Measured setup: 0.8% throughput, 50% detectors.
  static EmitterConfig measured_setup();
};

enum class Origin : std::uint8_t { kXX = 0, kX = 1, kBackground = 2, kUnknown = 3 };

struct PhotonEvent {
  std::uint8_t channel = 0;
  std::uint64_t timestamp = 0;  // ps since run start
  Origin origin = Origin::kUnknown;
  std::int64_t pulse = -1;  // simulation truth, not serialized

  bool operator==(const PhotonEvent& o) const {
    return channel == o.channel && timestamp == o.timestamp && origin == o.origin;
  }
};

struct TimestampStream {
  std::vector<PhotonEvent> events;
  std::uint64_t duration = 0;
  EmitterConfig config_snapshot;

  std::vector<std::uint64_t> timestamps() const;
  void validate() const;
};

inline constexpr std::uint8_t kChannelXX = 0;
inline constexpr std::uint8_t kChannelX = 1;
inline constexpr std::uint8_t kChannelA = 0;
inline constexpr std::uint8_t kChannelB = 1;

// Born probability of the joint projection on the state evolved for `delay`.
double ideal_pair_probability(const EmitterConfig& config, const BasisPair& pair, double delay_ps,
                              CircularConvention conv = CircularConvention::kRMinusI);

struct ProjectionRun {
  TimestampStream xx;
  TimestampStream x;
};

ProjectionRun simulate_projection_run(const EmitterConfig& config, const BasisPair& pair,
                                      std::uint64_t n_pulses, std::uint64_t seed,
                                      CircularConvention conv = CircularConvention::kRMinusI);

enum class Species { kX, kXX };

struct AutocorrelationRun {
  TimestampStream a;
  TimestampStream b;
};

AutocorrelationRun simulate_autocorrelation_run(const EmitterConfig& config, Species species,
                                                std::uint64_t n_pulses, std::uint64_t seed);

}  // namespace cascade
