// cascade-tomo: simulate cascade photon streams, run time-resolved state
// tomography and the correlation / curve-fit analyses.
//
// Exit codes: 0 success, 1 validation error, 2 computation failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cascade/analysis.hpp"
#include "cascade/config.hpp"
#include "cascade/correlation.hpp"
#include "cascade/errors.hpp"
#include "cascade/pipeline.hpp"
#include "cascade/stream_io.hpp"

using namespace cascade;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitComputation = 2;

RunConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  if (!path.empty()) return load_run_config(path, overrides);
  Json j = Json::object();
  apply_overrides(j, overrides);
  RunConfig c = run_config_from_json(j);
  apply_seed_env(c);
  return c;
}

Histogram load_histogram(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  return read_histogram_csv(is);
}

std::pair<std::vector<double>, std::vector<double>> load_xy(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open '" + path + "'");
  std::string line;
  std::getline(is, line);  // header
  std::vector<double> x, y;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    double a = 0.0, b = 0.0;
    char comma = 0;
    if (!(ls >> a >> comma >> b) || comma != ',') {
      throw ValidationError(path + ": malformed row at line " + std::to_string(line_no));
    }
    x.push_back(a);
    y.push_back(b);
  }
  return {x, y};
}

void emit(const Json& j, const std::string& out_path) {
  const std::string text = rounded(j).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw ValidationError("cannot write '" + out_path + "'");
  os << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-dot cascade simulation and time-resolved two-photon tomography"};
  app.require_subcommand(1);
  std::vector<std::string> overrides;
  std::string config_path, out_path;

  auto* sim = app.add_subcommand("simulate", "Simulate projection or autocorrelation timestamp streams");
  bool truth = false;
  std::string out_dir;
  sim->add_option("--config", config_path, "Run config JSON")->required();
  sim->add_option("--set", overrides, "Override a config key (a.b=value)");
  sim->add_option("--out", out_dir, "Output directory (overrides io.output_dir)");
  sim->add_flag("--truth", truth, "Keep simulation origin tags in exported streams");

  auto* tomo = app.add_subcommand("tomo", "Time-binned maximum-likelihood tomography");
  std::string manifest_path, counts_path, binned_path;
  auto* src_manifest = tomo->add_option("--manifest", manifest_path, "Manifest from `simulate`");
  auto* src_counts = tomo->add_option("--counts", counts_path, "CSV basis,counts,weight");
  auto* src_binned = tomo->add_option("--binned", binned_path, "CSV basis,bin_start_ps,counts");
  src_manifest->excludes(src_counts)->excludes(src_binned);
  src_counts->excludes(src_binned);
  tomo->add_option("--config", config_path, "Run config JSON");
  tomo->add_option("--set", overrides, "Override a config key (a.b=value)");
  tomo->add_option("--out", out_dir, "Output directory (overrides io.output_dir)");

  auto* analyze = app.add_subcommand("analyze", "Correlation and curve-fit analyses");
  analyze->require_subcommand(1);
  std::string hist_path, input_path;
  std::vector<std::string> stream_paths;
  double rep_period = 12500.0, bin_width = 100.0, window = 0.0, center = 0.0, half_window = 3000.0;
  int side_peaks = 3;
  double multiplier = 4.0;
  double value = 0.0;
  bool inverse = false;
  double cps = 0.0, setup_eff = 0.0, det_eff = 0.0, rep_rate = 0.0, reported = 0.0;

  auto* a_g2 = analyze->add_subcommand("g2", "Pulsed g2(0) from an autocorrelation histogram or stream pair");
  a_g2->add_option("--hist", hist_path, "Histogram CSV bin_start_ps,counts");
  a_g2->add_option("--streams", stream_paths, "Two timestamp files (a, b)")->expected(2);
  a_g2->add_option("--rep-period", rep_period, "Laser repetition period, ps")->capture_default_str();
  a_g2->add_option("--side-peaks", side_peaks, "Side peaks per side")->capture_default_str();
  a_g2->add_option("--bin-width", bin_width, "Bin width when correlating streams, ps")->capture_default_str();
  a_g2->add_option("--out", out_path);

  auto* a_life = analyze->add_subcommand("lifetime", "Exponential decay fit from the histogram maximum");
  a_life->add_option("--hist", hist_path)->required();
  a_life->add_option("--window", window, "Fit window after the maximum, ps (0: to the end)");
  a_life->add_option("--out", out_path);

  auto* a_fss = analyze->add_subcommand("fss", "FSS from peak energy vs waveplate angle (CSV angle_rad,energy_ueV)");
  a_fss->add_option("--input", input_path)->required();
  a_fss->add_option("--multiplier", multiplier, "Energy oscillation frequency / plate angle")->capture_default_str();
  a_fss->add_option("--out", out_path);

  auto* a_period = analyze->add_subcommand("fss-period", "Convert an oscillation period (ps) to FSS (µeV)");
  a_period->add_option("value", value, "Period in ps (FSS in µeV with --inverse)")->required();
  a_period->add_flag("--inverse", inverse, "Convert FSS to period instead");
  a_period->add_option("--out", out_path);

  auto* a_recap = analyze->add_subcommand("recapture", "Recapture model fit around a histogram peak");
  a_recap->add_option("--hist", hist_path)->required();
  a_recap->add_option("--center", center, "Peak center, ps")->capture_default_str();
  a_recap->add_option("--half-window", half_window, "Half width of the fit window, ps")->capture_default_str();
  a_recap->add_option("--out", out_path);

  auto* a_power = analyze->add_subcommand("power", "Log-log power-law fit (CSV power,intensity)");
  a_power->add_option("--input", input_path)->required();
  a_power->add_option("--out", out_path);

  auto* a_eff = analyze->add_subcommand("efficiency", "Photon rate at the first lens");
  a_eff->add_option("--cps", cps, "Measured count rate, counts/s")->required();
  a_eff->add_option("--setup-eff", setup_eff, "Setup throughput (fraction)")->required();
  a_eff->add_option("--det-eff", det_eff, "Detector efficiency (fraction)")->required();
  a_eff->add_option("--rep-rate", rep_rate, "Repetition rate, MHz")->required();
  a_eff->add_option("--reported-mhz", reported, "Reported rate to compare against");
  a_eff->add_option("--out", out_path);

  auto* rep = app.add_subcommand("report", "Summarize a tomography report.json");
  rep->add_option("--input", input_path)->required();
  bool as_csv = false;
  rep->add_flag("--csv", as_csv, "Print fidelity/concurrence vs time as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (sim->parsed()) {
      RunConfig c = config_from(config_path, overrides);
      if (!out_dir.empty()) c.io.output_dir = out_dir;
      if (truth) c.io.truth = true;
      const Manifest m = cmd_simulate(c);
      std::cout << "wrote " << m.files.size() << " stream files and manifest.json to " << c.io.output_dir << "\n";
    } else if (tomo->parsed()) {
      RunConfig c = config_from(config_path, overrides);
      if (!out_dir.empty()) c.io.output_dir = out_dir;
      Json report;
      if (!manifest_path.empty()) {
        report = cmd_tomo(manifest_path, TomoSource::kManifest, c);
      } else if (!counts_path.empty()) {
        report = cmd_tomo(counts_path, TomoSource::kCounts, c);
      } else if (!binned_path.empty()) {
        report = cmd_tomo(binned_path, TomoSource::kBinned, c);
      } else {
        throw ValidationError("tomo needs one of --manifest, --counts or --binned");
      }
      std::cout << render_report(report);
    } else if (a_g2->parsed()) {
      Histogram h;
      if (!hist_path.empty()) {
        h = load_histogram(hist_path);
      } else if (stream_paths.size() == 2) {
        const auto a = import_stream(stream_paths[0]).timestamps();
        const auto b = import_stream(stream_paths[1]).timestamps();
        const auto reach = static_cast<std::int64_t>((side_peaks + 0.5) * rep_period);
        h = cross_correlate(a, b, static_cast<std::int64_t>(bin_width), reach);
      } else {
        throw ValidationError("g2 needs --hist or --streams");
      }
      emit(to_json(g2_zero(h, rep_period, side_peaks)), out_path);
    } else if (a_life->parsed()) {
      emit(to_json(fit_lifetime(load_histogram(hist_path), window)), out_path);
    } else if (a_fss->parsed()) {
      const auto [x, y] = load_xy(input_path);
      const auto est = fss_from_peak_positions(x, y, multiplier);
      Json j = to_json(est.fit);
      j["fss_ueV"] = est.fss;
      emit(j, out_path);
    } else if (a_period->parsed()) {
      Json j;
      if (inverse) {
        j = Json{{"fss_ueV", value}, {"period_ps", period_from_fss(value)}};
      } else {
        j = Json{{"period_ps", value}, {"fss_ueV", fss_from_period(value)}};
      }
      emit(j, out_path);
    } else if (a_recap->parsed()) {
      emit(to_json(fit_recapture(load_histogram(hist_path), center, half_window)), out_path);
    } else if (a_power->parsed()) {
      const auto [x, y] = load_xy(input_path);
      emit(to_json(fit_model(ModelKind::kPowerLaw, x, y)), out_path);
    } else if (a_eff->parsed()) {
      const auto r = first_lens_rate(cps, setup_eff, det_eff, rep_rate);
      Json j{{"rate_mhz", r.rate_mhz}, {"fraction_of_pulses", r.fraction_of_pulses}};
      if (reported > 0.0) {
        const double d = rate_discrepancy(r, reported);
        j["reported_mhz"] = reported;
        j["relative_discrepancy"] = d;
        if (d > 0.01) {
          j["warning"] = "computed first-lens rate disagrees with the reported value";
          std::cerr << "warning: computed " << r.rate_mhz << " MHz vs reported " << reported << " MHz\n";
        }
      }
      emit(j, out_path);
    } else if (rep->parsed()) {
      std::ifstream is(input_path);
      if (!is) throw ValidationError("cannot open '" + input_path + "'");
      Json report;
      try {
        report = Json::parse(is);
      } catch (const Json::exception& e) {
        throw ValidationError(std::string("report is not valid JSON: ") + e.what());
      }
      if (as_csv) {
        std::cout << "bin_start_ps,fidelity,concurrence\n";
        for (const auto& b : report.at("bins")) {
          std::cout << b.at("bin_start_ps").dump() << ',' << b.at("fidelity").dump() << ','
                    << b.at("concurrence").dump() << '\n';
        }
      } else {
        std::cout << render_report(report);
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ComputationError& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return kExitComputation;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return kExitComputation;
  }
  return 0;
}
