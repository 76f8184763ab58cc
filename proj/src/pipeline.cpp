#include "cascade/pipeline.hpp"

#include <omp.h>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cascade/correlation.hpp"
#include "cascade/errors.hpp"
#include "cascade/stream_io.hpp"

namespace cascade {

namespace fs = std::filesystem;

namespace {

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("cannot create output directory '" + dir.string() + "'");
  }
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw ValidationError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

std::string extension_for(const std::string& format) { return format == "csv" ? ".csv" : ".ctts"; }

ManifestEntry write_entry(const TimestampStream& s, const fs::path& dir, const std::string& stem,
                          const std::string& format, bool truth, const std::string& basis,
                          const std::string& arm) {
  const std::string name = stem + extension_for(format);
  export_stream(s, dir / name, truth);
  return {basis, arm, name, s.events.size(), fnv1a64_hex(dir / name)};
}

template <typename Body>
void parallel_indexed(long long n, Body body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  #pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Matrix4c correction_matrix(const RunConfig& config) {
  if (!config.tomography.correction) return Matrix4c::Identity();
  const auto& c = *config.tomography.correction;
  const Matrix2c u = correction_unitary(c.unitary);
  const Matrix2c id = Matrix2c::Identity();
  return kron(c.arms == CorrectionArms::kXOnly ? id : u, c.arms == CorrectionArms::kXXOnly ? id : u);
}

HistogramSet restrict_to_bases(const HistogramSet& all, int basis_count) {
  HistogramSet out;
  for (const auto& pair : tomography_bases(basis_count)) {
    auto it = all.find(pair);
    if (it == all.end()) throw ValidationError("missing basis pair " + pair.label());
    out.emplace(pair, it->second);
  }
  return out;
}

}  // namespace

std::string fnv1a64_hex(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError("cannot read '" + file.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Json to_json(const Manifest& m) {
  Json files = Json::array();
  for (const auto& f : m.files) {
    files.push_back(Json{{"basis", f.basis}, {"arm", f.arm}, {"path", f.path}, {"records", f.records},
                         {"fnv1a64", f.fnv1a64}});
  }
  return Json{{"toolkit_version", kToolkitVersion}, {"mode", m.mode}, {"config", m.config}, {"files", files}};
}

Manifest manifest_from_json(const Json& j) {
  try {
    Manifest m;
    m.mode = j.at("mode").get<std::string>();
    if (j.contains("config")) m.config = j.at("config");
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("basis").get<std::string>(), f.at("arm").get<std::string>(),
                         f.at("path").get<std::string>(), f.at("records").get<std::uint64_t>(),
                         f.value("fnv1a64", std::string{})});
    }
    return m;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open manifest '" + path.string() + "'");
  try {
    return manifest_from_json(Json::parse(is));
  } catch (const Json::parse_error& e) {
    throw ValidationError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

Manifest cmd_simulate(const RunConfig& config) {
  config.validate();
  if (!config.simulation) throw ValidationError("config has no simulation block");
  const auto& sim = *config.simulation;
  const fs::path dir = config.io.output_dir;
  ensure_dir(dir);

  Manifest manifest;
  manifest.config = to_json(config);
  const auto& formats = config.io.formats;
  if (sim.mode == SimulationMode::kAutocorrelation) {
    manifest.mode = "autocorrelation";
    const auto run = simulate_autocorrelation_run(config.emitter, sim.species, sim.n_pulses, sim.seed);
    for (const auto& f : formats) {
      manifest.files.push_back(write_entry(run.a, dir, "auto_a", f, config.io.truth, "", "a"));
      manifest.files.push_back(write_entry(run.b, dir, "auto_b", f, config.io.truth, "", "b"));
    }
  } else {
    manifest.mode = "projection";
    const auto bases = tomography_bases(config.tomography.basis_count);
    std::vector<std::vector<ManifestEntry>> slots(bases.size());
    parallel_indexed(static_cast<long long>(bases.size()), [&](std::size_t i) {
      const auto& pair = bases[i];
      const auto run = simulate_projection_run(config.emitter, pair, sim.n_pulses,
                                               detail::mix_seed(sim.seed, i),
                                               config.tomography.circular_convention);
      #pragma omp critical(cascade_output)
      for (const auto& f : formats) {
        slots[i].push_back(write_entry(run.xx, dir, pair.label() + "_xx", f, config.io.truth, pair.label(), "xx"));
        slots[i].push_back(write_entry(run.x, dir, pair.label() + "_x", f, config.io.truth, pair.label(), "x"));
      }
    });
    for (auto& s : slots) manifest.files.insert(manifest.files.end(), s.begin(), s.end());
  }
  write_text(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return manifest;
}

HistogramSet coincidence_histograms(const Manifest& manifest, const fs::path& manifest_dir,
                                    double bin_width_ps, double max_delay_ps) {
  if (manifest.mode != "projection") throw ValidationError("manifest is not from a projection simulation");
  const auto width = static_cast<std::int64_t>(std::llround(bin_width_ps));
  if (std::abs(bin_width_ps - static_cast<double>(width)) > 1e-9 || width <= 0) {
    throw ValidationError("coincidence bin width must be a whole number of ps");
  }
  const auto max_delay = static_cast<std::int64_t>(std::llround(max_delay_ps));

  std::map<std::string, std::pair<const ManifestEntry*, const ManifestEntry*>> paths;  // basis -> (xx, x)
  for (const auto& f : manifest.files) {
    auto& slot = paths[f.basis];
    if (f.arm == "xx" && !slot.first) slot.first = &f;
    if (f.arm == "x" && !slot.second) slot.second = &f;
  }
  std::vector<std::pair<BasisPair, std::pair<const ManifestEntry*, const ManifestEntry*>>> jobs;
  for (const auto& [basis, p] : paths) {
    if (!p.first || !p.second) throw ValidationError("manifest lacks a stream pair for basis " + basis);
    jobs.push_back({BasisPair::parse(basis), p});
  }
  auto load = [&](const ManifestEntry& e) {
    const fs::path file = manifest_dir / e.path;
    if (!e.fnv1a64.empty() && fnv1a64_hex(file) != e.fnv1a64) {
      throw ValidationError("stream file '" + e.path + "' does not match its manifest hash");
    }
    const TimestampStream s = import_stream(file);
    if (s.events.size() != e.records) {
      throw ValidationError("stream file '" + e.path + "' has " + std::to_string(s.events.size()) +
                            " records, manifest lists " + std::to_string(e.records));
    }
    return s.timestamps();
  };
  std::vector<Histogram> hists(jobs.size());
  parallel_indexed(static_cast<long long>(jobs.size()), [&](std::size_t i) {
    const auto xx = load(*jobs[i].second.first);
    const auto x = load(*jobs[i].second.second);
    hists[i] = correlate_range_serial(xx, x, width, 0, max_delay);
  });
  HistogramSet out;
  for (std::size_t i = 0; i < jobs.size(); ++i) out.emplace(jobs[i].first, std::move(hists[i]));
  return out;
}

HistogramSet read_binned_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("basis,bin_start_ps,counts", 0) != 0) {
    throw ValidationError("binned CSV must start with header 'basis,bin_start_ps,counts'");
  }
  std::map<BasisPair, std::map<double, std::uint64_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string basis, start, counts;
    std::getline(ls, basis, ',');
    std::getline(ls, start, ',');
    std::getline(ls, counts, ',');
    try {
      const BasisPair pair = BasisPair::parse(basis);
      const double s = std::stod(start);
      const long long c = std::stoll(counts);
      if (c < 0) throw ValidationError("negative count");
      if (!rows[pair].emplace(s, static_cast<std::uint64_t>(c)).second) {
        throw ValidationError("duplicate bin");
      }
    } catch (const std::exception& e) {
      throw ValidationError("malformed binned CSV at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (rows.empty()) throw ValidationError("binned CSV has no rows");
  std::set<double> starts;
  for (const auto& [pair, bins] : rows)
    for (const auto& [s, c] : bins) starts.insert(s);
  const double origin = *starts.begin();
  double width = 0.0;
  for (auto it = std::next(starts.begin()); it != starts.end(); ++it) {
    const double d = *it - *std::prev(it);
    if (width == 0.0 || d < width) width = d;
  }
  if (width == 0.0) width = 1.0;
  const auto n_bins = static_cast<std::size_t>(std::llround((*starts.rbegin() - origin) / width)) + 1;
  HistogramSet out;
  for (const auto& [pair, bins] : rows) {
    if (bins.size() != starts.size()) {
      throw ValidationError("inconsistent binning: basis " + pair.label() + " has a different set of bins");
    }
    Histogram h(width, origin, n_bins);
    for (const auto& [s, c] : bins) {
      const double k = (s - origin) / width;
      if (std::abs(k - std::round(k)) > 1e-6) throw ValidationError("inconsistent binning: bins are not uniform");
      h.counts[static_cast<std::size_t>(std::llround(k))] = c;
    }
    out.emplace(pair, std::move(h));
  }
  return out;
}

TomographyReport analyze_inputs(const std::vector<TomographyInput>& inputs, const RunConfig& config) {
  const auto& t = config.tomography;
  MleOptions mle;
  mle.likelihood = t.likelihood;
  mle.convention = t.circular_convention;
  mle.seed = config.simulation ? config.simulation->seed : 0;
  const Matrix4c U = correction_matrix(config);
  const PureState2Q target = PureState2Q::normalized(U.adjoint() * PureState2Q::phi_plus().amplitudes());
  const std::uint64_t threshold = std::max<std::uint64_t>(t.min_counts_per_bin, 1);

  TomographyReport report;
  report.config = to_json(config);
  report.bins.resize(inputs.size());
  parallel_indexed(static_cast<long long>(inputs.size()), [&](std::size_t k) {
    const auto& in = inputs[k];
    BinMetrics& m = report.bins[k];
    m.bin = in.time_bin.value_or(TimeBin{});
    m.total_counts = in.total_counts();
    if (m.total_counts < threshold) {
      m.skipped = true;
      return;
    }
    const auto res = mle_reconstruct(in, mle);
    m.converged = res.converged;
    m.rho = t.correction ? apply_correction(res.rho, t.correction->unitary, t.correction->arms) : res.rho;
    m.fidelity = fidelity(m.rho, PureState2Q::phi_plus());
    m.concurrence = concurrence(m.rho);
    if (t.bootstrap_samples >= 2) {
      const std::uint64_t seed = detail::mix_seed(mle.seed, 1000003ULL + k);
      m.fidelity_std = bootstrap_uncertainty_serial(in, t.bootstrap_samples, Metric::kFidelity, target, seed, mle).std;
      m.concurrence_std =
          bootstrap_uncertainty_serial(in, t.bootstrap_samples, Metric::kConcurrence, target, seed, mle).std;
    }
  });

  std::vector<double> times, fids, sigmas;
  bool have_sigmas = true;
  for (const auto& b : report.bins) {
    if (b.skipped || !(b.bin.width_ps > 0.0)) continue;
    times.push_back(b.bin.start_ps + 0.5 * b.bin.width_ps);
    fids.push_back(b.fidelity);
    if (b.fidelity_std && *b.fidelity_std > 0.0) {
      sigmas.push_back(*b.fidelity_std);
    } else {
      have_sigmas = false;
    }
  }
  if (times.size() >= 6) {
    try {
      report.oscillation = fit_oscillation(times, fids, have_sigmas ? std::span<const double>(sigmas)
                                                                    : std::span<const double>());
    } catch (const std::exception&) {
      report.oscillation.reset();
    }
  }
  return report;
}

TomographyReport analyze_histograms(const HistogramSet& histograms, const RunConfig& config) {
  const HistogramSet used = restrict_to_bases(histograms, config.tomography.basis_count);
  return analyze_inputs(split_time_bins(used, config.tomography.bin_width_ps), config);
}

Json report_json(const TomographyReport& report, const std::vector<std::string>& outputs) {
  Json bins = Json::array(), skipped = Json::array();
  const BinMetrics* best_f = nullptr;
  const BinMetrics* best_c = nullptr;
  for (const auto& b : report.bins) {
    if (b.skipped) {
      skipped.push_back(Json{{"bin_start_ps", b.bin.start_ps}, {"bin_width_ps", b.bin.width_ps},
                             {"total_counts", b.total_counts}});
      continue;
    }
    if (!best_f || b.fidelity > best_f->fidelity) best_f = &b;
    if (!best_c || b.concurrence > best_c->concurrence) best_c = &b;
    bins.push_back(Json{{"bin_start_ps", b.bin.start_ps},
                        {"bin_width_ps", b.bin.width_ps},
                        {"total_counts", b.total_counts},
                        {"rho", to_json(b.rho)},
                        {"fidelity", b.fidelity},
                        {"concurrence", b.concurrence},
                        {"fidelity_std", b.fidelity_std ? Json(*b.fidelity_std) : Json(nullptr)},
                        {"concurrence_std", b.concurrence_std ? Json(*b.concurrence_std) : Json(nullptr)},
                        {"converged", b.converged}});
  }
  Json summary = Json::object();
  summary["reconstructed_bins"] = bins.size();
  summary["skipped_bins"] = skipped.size();
  summary["max_fidelity"] = best_f ? Json(best_f->fidelity) : Json(nullptr);
  summary["max_fidelity_bin_start_ps"] = best_f ? Json(best_f->bin.start_ps) : Json(nullptr);
  summary["max_concurrence"] = best_c ? Json(best_c->concurrence) : Json(nullptr);
  summary["max_concurrence_bin_start_ps"] = best_c ? Json(best_c->bin.start_ps) : Json(nullptr);
  if (report.oscillation) {
    summary["oscillation_fit"] = to_json(*report.oscillation);
    const double period = report.oscillation->param("P");
    summary["oscillation_period_ps"] = period;
    summary["fss_from_period_ueV"] = fss_from_period(period);
  } else {
    summary["oscillation_fit"] = nullptr;
    summary["oscillation_period_ps"] = nullptr;
    summary["fss_from_period_ueV"] = nullptr;
  }
  Json out{{"toolkit_version", kToolkitVersion},
           {"config", report.config},
           {"summary", summary},
           {"bins", bins},
           {"skipped_bins", skipped},
           {"outputs", outputs}};
  return rounded(out);
}

Json write_tomography_outputs(const TomographyReport& report, const fs::path& out_dir) {
  ensure_dir(out_dir);
  ensure_dir(out_dir / "rho");
  std::vector<std::string> outputs = {"report.json", "fidelity_vs_time.csv"};

  std::ostringstream csv;
  csv << "bin_start_ps,bin_center_ps,total_counts,fidelity,fidelity_std,concurrence,concurrence_std,converged\n";
  std::size_t index = 0;
  for (const auto& b : report.bins) {
    if (b.skipped) continue;
    csv << fmt12(b.bin.start_ps) << ',' << fmt12(b.bin.start_ps + 0.5 * b.bin.width_ps) << ','
        << b.total_counts << ',' << fmt12(b.fidelity) << ','
        << (b.fidelity_std ? fmt12(*b.fidelity_std) : "") << ',' << fmt12(b.concurrence) << ','
        << (b.concurrence_std ? fmt12(*b.concurrence_std) : "") << ',' << (b.converged ? 1 : 0) << '\n';
    char name[32];
    std::snprintf(name, sizeof name, "rho/bin_%05zu.json", index++);
    Json rho = to_json(b.rho);
    rho["bin_start_ps"] = b.bin.start_ps;
    rho["bin_width_ps"] = b.bin.width_ps;
    write_text(out_dir / name, rho.dump(2) + "\n");
    outputs.emplace_back(name);
  }
  write_text(out_dir / "fidelity_vs_time.csv", csv.str());
  Json j = report_json(report, outputs);
  write_text(out_dir / "report.json", j.dump(2) + "\n");
  return j;
}

Json cmd_tomo(const fs::path& input, TomoSource source, const RunConfig& config) {
  config.validate();
  TomographyReport report;
  switch (source) {
    case TomoSource::kManifest: {
      const Manifest m = read_manifest(input);
      const HistogramSet h = coincidence_histograms(m, input.parent_path(), config.tomography.bin_width_ps,
                                                    config.tomography.max_delay_ps);
      report = analyze_histograms(h, config);
      break;
    }
    case TomoSource::kCounts: {
      std::ifstream is(input);
      if (!is) throw ValidationError("cannot open '" + input.string() + "'");
      report = analyze_inputs({read_tomography_csv(is)}, config);
      break;
    }
    case TomoSource::kBinned: {
      std::ifstream is(input);
      if (!is) throw ValidationError("cannot open '" + input.string() + "'");
      report = analyze_histograms(read_binned_csv(is), config);
      break;
    }
  }
  return write_tomography_outputs(report, config.io.output_dir);
}

std::string render_report(const Json& report) {
  std::ostringstream os;
  try {
    const Json& s = report.at("summary");
    os << "toolkit version      " << report.value("toolkit_version", std::string("?")) << '\n';
    os << "reconstructed bins   " << s.at("reconstructed_bins") << '\n';
    os << "skipped bins         " << s.at("skipped_bins") << '\n';
    auto show = [&](const char* label, const char* key, const char* bin_key, const char* unit = "") {
      os << label;
      if (s.at(key).is_null()) {
        os << "n/a\n";
      } else {
        os << fmt12(s.at(key).get<double>());
        os << unit;
        if (bin_key) os << " at bin starting " << fmt12(s.at(bin_key).get<double>()) << " ps";
        os << '\n';
      }
    };
    show("max fidelity         ", "max_fidelity", "max_fidelity_bin_start_ps");
    show("max concurrence      ", "max_concurrence", "max_concurrence_bin_start_ps");
    show("oscillation period   ", "oscillation_period_ps", nullptr, " ps");
    show("fss from period      ", "fss_from_period_ueV", nullptr, " µeV");
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return os.str();
}

}  // namespace cascade
