#pragma once

// Generator draws and longhand model forms for fit-recovery checks.

#include <cmath>
#include <random>
#include <vector>

#include "cascade/fitting.hpp"
#include "oracles.hpp"

namespace fit_models {

using cascade::ModelKind;
using oracle::kPi;

// Model values written out independently of evaluate_model.
inline double reference(ModelKind kind, const std::vector<double>& p, double x) {
  switch (kind) {
    case ModelKind::kExponential: return p[0] + p[1] * std::exp(-(x - p[2]) / p[3]);
    case ModelKind::kSinusoid: return p[0] + p[1] * std::sin(2 * kPi * x / p[2] + p[3]);
    case ModelKind::kRecapture: {
      const double u = std::abs(x - p[2]);
      return p[0] + p[1] * std::exp(-u / p[3]) * (1 - std::exp(-u / p[4]));
    }
    case ModelKind::kPowerLaw: return std::exp(p[0] * std::log(x) + p[1]);
    case ModelKind::kLorentzian: {
      const double hw = p[3] / 2;
      return p[0] + p[1] * hw * hw / ((x - p[2]) * (x - p[2]) + hw * hw);
    }
  }
  return 0.0;
}

struct Draw {
  std::vector<double> params, x;
};

inline Draw draw(ModelKind kind, std::mt19937_64& rng) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  Draw d;
  switch (kind) {
    case ModelKind::kExponential: {
      d.params = {u(1, 50), u(100, 1000), 0.0, u(200, 3000)};
      for (int i = 0; i < 200; ++i) d.x.push_back(i * 5.0 * d.params[3] / 200);
      break;
    }
    case ModelKind::kSinusoid: {
      d.params = {u(-5, 5), u(0.5, 3), u(200, 2000), u(-kPi, kPi)};
      for (int i = 0; i < 300; ++i) d.x.push_back(i * 20.0);
      break;
    }
    case ModelKind::kRecapture: {
      d.params = {u(1, 20), u(100, 1000), u(-200, 200), u(500, 2000), u(200, 1000)};
      for (int i = 0; i < 600; ++i) d.x.push_back(d.params[2] - 6000.0 + i * 20.0 + 7.0);
      break;
    }
    case ModelKind::kPowerLaw: {
      d.params = {u(0.5, 2), u(-2, 2)};
      for (int i = 0; i < 40; ++i) d.x.push_back(std::pow(10.0, 2.0 * i / 39));
      break;
    }
    case ModelKind::kLorentzian: {
      d.params = {u(1, 20), u(100, 1000), u(-500, 500), u(100, 1000)};
      for (int i = 0; i < 400; ++i) d.x.push_back(d.params[2] - 5000.0 + i * 25.0);
      break;
    }
  }
  return d;
}

inline constexpr ModelKind kAllKinds[] = {ModelKind::kExponential, ModelKind::kSinusoid, ModelKind::kRecapture,
                               ModelKind::kPowerLaw, ModelKind::kLorentzian};

}  // namespace fit_models
