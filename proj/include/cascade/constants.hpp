#pragma once

#include <numbers>

namespace cascade {

// Energies in µeV, times in ps.
struct PhysicalConstants {
  static constexpr double hbar = 658.2119569;  // µeV·ps
  static constexpr double h = 2.0 * std::numbers::pi * hbar;
};

}  // namespace cascade
