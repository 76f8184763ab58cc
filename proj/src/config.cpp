#include "cascade/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

Json require_object(const Json& j, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  return j;
}

std::string likelihood_name(Likelihood l) { return l == Likelihood::kGaussian ? "gaussian" : "poisson"; }

Likelihood likelihood_from(const std::string& s) {
  if (s == "gaussian") return Likelihood::kGaussian;
  if (s == "poisson") return Likelihood::kPoisson;
  throw ValidationError("unknown likelihood '" + s + "'");
}

std::string convention_name(CircularConvention c) {
  return c == CircularConvention::kRMinusI ? "R=(1,-i)" : "R=(1,+i)";
}

CircularConvention convention_from(const std::string& s) {
  if (s == "R=(1,-i)" || s == "minus_i") return CircularConvention::kRMinusI;
  if (s == "R=(1,+i)" || s == "plus_i") return CircularConvention::kRPlusI;
  throw ValidationError("unknown circular_convention '" + s + "'");
}

std::uint64_t parse_seed(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ValidationError("invalid seed value '" + s + "'");
  return v;
}

}  // namespace

void RunConfig::validate() const {
  emitter.validate();
  if (tomography.basis_count != 16 && tomography.basis_count != 36) {
    throw ValidationError("tomography.basis_count must be 16 or 36");
  }
  if (!(tomography.bin_width_ps > 0.0)) throw ValidationError("tomography.bin_width_ps must be > 0");
  if (!(tomography.max_delay_ps > tomography.bin_width_ps)) {
    throw ValidationError("tomography.max_delay_ps must exceed bin_width_ps");
  }
  if (tomography.bootstrap_samples == 1 || tomography.bootstrap_samples < 0) {
    throw ValidationError("tomography.bootstrap_samples must be 0 or >= 2");
  }
  for (const auto& f : io.formats) {
    if (f != "binary" && f != "csv") throw ValidationError("io.formats entries must be 'binary' or 'csv'");
  }
}

void apply_overrides(Json& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like key=value: '" + o + "'");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(raw);
    } catch (const Json::exception&) {
      value = raw;
    }
    Json* node = &config;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ValidationError("empty path component in override '" + o + "'");
      if (!node->is_object()) *node = Json::object();
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
}

Json to_json(const EmitterConfig& c) {
  return Json{{"fss", c.fss},
              {"tau_xx", c.tau_xx},
              {"tau_x", c.tau_x},
              {"rep_rate", c.rep_rate},
              {"recapture_probability", c.recapture_probability},
              {"recapture_time", c.recapture_time},
              {"setup_efficiency", c.setup_efficiency},
              {"detector_efficiency", c.detector_efficiency},
              {"background_rate", c.background_rate},
              {"excitation_fraction", c.excitation_fraction},
              {"jitter_sigma", c.jitter_sigma}};
}

EmitterConfig emitter_from_json(const Json& j) {
  require_object(j, "emitter");
  static const char* kKnown[] = {"fss", "tau_xx", "tau_x", "rep_rate", "recapture_probability",
                                 "recapture_time", "setup_efficiency", "detector_efficiency",
                                 "background_rate", "excitation_fraction", "jitter_sigma"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ValidationError("unknown emitter field '" + key + "'");
    }
  }
  EmitterConfig c;
  read_field(j, "fss", c.fss);
  read_field(j, "tau_xx", c.tau_xx);
  read_field(j, "tau_x", c.tau_x);
  read_field(j, "rep_rate", c.rep_rate);
  read_field(j, "recapture_probability", c.recapture_probability);
  read_field(j, "recapture_time", c.recapture_time);
  read_field(j, "setup_efficiency", c.setup_efficiency);
  read_field(j, "detector_efficiency", c.detector_efficiency);
  read_field(j, "background_rate", c.background_rate);
  read_field(j, "excitation_fraction", c.excitation_fraction);
  read_field(j, "jitter_sigma", c.jitter_sigma);
  return c;
}

RunConfig run_config_from_json(const Json& j) {
  require_object(j, "config");
  RunConfig c;
  if (j.contains("emitter")) c.emitter = emitter_from_json(j.at("emitter"));
  if (j.contains("tomography")) {
    const Json& t = require_object(j.at("tomography"), "tomography");
    read_field(t, "basis_count", c.tomography.basis_count);
    read_field(t, "bin_width_ps", c.tomography.bin_width_ps);
    read_field(t, "max_delay_ps", c.tomography.max_delay_ps);
    read_field(t, "min_counts_per_bin", c.tomography.min_counts_per_bin);
    read_field(t, "bootstrap_samples", c.tomography.bootstrap_samples);
    std::string s;
    read_field(t, "likelihood", s);
    if (!s.empty()) c.tomography.likelihood = likelihood_from(s);
    s.clear();
    read_field(t, "circular_convention", s);
    if (!s.empty()) c.tomography.circular_convention = convention_from(s);
    if (t.contains("correction") && !t.at("correction").is_null()) {
      const Json& k = require_object(t.at("correction"), "tomography.correction");
      CorrectionSettings cs;
      read_field(k, "theta", cs.unitary.theta);
      read_field(k, "phi", cs.unitary.phi);
      std::string arms = "both";
      read_field(k, "arms", arms);
      cs.arms = arms_from_string(arms);
      c.tomography.correction = cs;
    }
  }
  if (j.contains("simulation") && !j.at("simulation").is_null()) {
    const Json& s = require_object(j.at("simulation"), "simulation");
    if (!s.contains("seed")) throw ValidationError("simulation block requires a seed");
    SimulationSettings sim;
    read_field(s, "n_pulses", sim.n_pulses);
    read_field(s, "seed", sim.seed);
    std::string mode = "projection";
    read_field(s, "mode", mode);
    if (mode == "projection") {
      sim.mode = SimulationMode::kProjection;
    } else if (mode == "autocorrelation") {
      sim.mode = SimulationMode::kAutocorrelation;
    } else {
      throw ValidationError("simulation.mode must be 'projection' or 'autocorrelation'");
    }
    std::string species = "X";
    read_field(s, "species", species);
    if (species == "X") {
      sim.species = Species::kX;
    } else if (species == "XX") {
      sim.species = Species::kXX;
    } else {
      throw ValidationError("simulation.species must be 'X' or 'XX'");
    }
    c.simulation = sim;
  }
  if (j.contains("io")) {
    const Json& io = require_object(j.at("io"), "io");
    read_field(io, "output_dir", c.io.output_dir);
    read_field(io, "formats", c.io.formats);
    read_field(io, "truth", c.io.truth);
  }
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json tomo{{"basis_count", c.tomography.basis_count},
            {"bin_width_ps", c.tomography.bin_width_ps},
            {"max_delay_ps", c.tomography.max_delay_ps},
            {"min_counts_per_bin", c.tomography.min_counts_per_bin},
            {"bootstrap_samples", c.tomography.bootstrap_samples},
            {"likelihood", likelihood_name(c.tomography.likelihood)},
            {"circular_convention", convention_name(c.tomography.circular_convention)}};
  if (c.tomography.correction) {
    tomo["correction"] = Json{{"theta", c.tomography.correction->unitary.theta},
                              {"phi", c.tomography.correction->unitary.phi},
                              {"arms", to_string(c.tomography.correction->arms)}};
  } else {
    tomo["correction"] = nullptr;
  }
  Json out{{"emitter", to_json(c.emitter)}, {"tomography", tomo}};
  if (c.simulation) {
    out["simulation"] = Json{
        {"n_pulses", c.simulation->n_pulses},
        {"seed", c.simulation->seed},
        {"mode", c.simulation->mode == SimulationMode::kProjection ? "projection" : "autocorrelation"},
        {"species", c.simulation->species == Species::kX ? "X" : "XX"}};
  } else {
    out["simulation"] = nullptr;
  }
  out["io"] = Json{{"output_dir", c.io.output_dir}, {"formats", c.io.formats}, {"truth", c.io.truth}};
  return out;
}

void apply_seed_env(RunConfig& config) {
  if (const char* env = std::getenv(kSeedEnvVar); env && *env) {
    if (!config.simulation) config.simulation = SimulationSettings{};
    config.simulation->seed = parse_seed(env);
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::exception& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  apply_overrides(j, overrides);
  RunConfig c = run_config_from_json(j);
  apply_seed_env(c);
  return c;
}

Json to_json(const DensityMatrix& rho) {
  Json re = Json::array(), im = Json::array();
  for (int r = 0; r < 4; ++r) {
    Json rr = Json::array(), ir = Json::array();
    for (int c = 0; c < 4; ++c) {
      rr.push_back(rho(r, c).real());
      ir.push_back(rho(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ir);
  }
  return Json{{"re", re}, {"im", im}};
}

DensityMatrix density_from_json(const Json& j) {
  try {
    const Json& re = j.at("re");
    const Json& im = j.at("im");
    if (re.size() != 4 || im.size() != 4) throw ValidationError("density matrix must be 4x4");
    Matrix4c m;
    for (int r = 0; r < 4; ++r) {
      if (re.at(r).size() != 4 || im.at(r).size() != 4) throw ValidationError("density matrix must be 4x4");
      for (int c = 0; c < 4; ++c) m(r, c) = cplx(re.at(r).at(c).get<double>(), im.at(r).at(c).get<double>());
    }
    return DensityMatrix(m);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed density matrix JSON: ") + e.what());
  }
}

Json to_json(const FitResult& fit) {
  Json params = Json::object(), errors = Json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    params[fit.names[i]] = fit.params[i];
    errors[fit.names[i]] = fit.std_errors[i];
  }
  return Json{{"model", fit.model},
              {"params", params},
              {"std_errors", errors},
              {"reduced_chi2", fit.reduced_chi2},
              {"converged", fit.converged}};
}

Json to_json(const G2Result& g2) {
  return Json{{"g2_zero", g2.g2_zero},
              {"window_delta", g2.window_delta},
              {"side_peak_fwhm", g2.side_peak_fwhm},
              {"side_peak_centers", g2.side_peak_centers},
              {"side_window_sums", g2.side_window_sums},
              {"center_window_sum", g2.center_window_sum}};
}

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

Json rounded(const Json& j) {
  if (j.is_number_float()) return round12(j.get<double>());
  if (j.is_array() || j.is_object()) {
    Json out = j;
    for (auto& v : out) v = rounded(v);
    return out;
  }
  return j;
}

}  // namespace cascade
