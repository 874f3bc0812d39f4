#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qdimer/io.hpp"

namespace qdimer::io {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string branch_label(const DimerParams<double>& p, double i1) {
  const auto folds = fold_intensities(p);
  if (!folds) return "lower";
  if (i1 <= folds->first) return "lower";
  return i1 < folds->second ? "middle" : "upper";
}

// pump set from --pump or from --pump-fraction times the located threshold
DimerParams<double> resolve_pump(const RunConfig& cfg, std::ostream& out) {
  DimerParams<double> p = cfg.params;
  if (!cfg.pumpFraction) return p;
  const Branch b = cfg.branch.value_or(Branch::Lower);
  const double threshold = locate_threshold(p, cfg.pumpReference, b, 0.0, cfg.thresholdMax);
  p.pump = *cfg.pumpFraction * threshold;
  out << (cfg.pumpReference == ThresholdKind::Hopf ? "hopf" : "static") << " threshold " << fmt(threshold)
      << ", pump " << fmt(p.pump) << "\n";
  return p;
}

SymmetricSteadyState<double> select_state(const DimerParams<double>& p, const std::optional<Branch>& branch) {
  const auto roots = solve_symmetric_steady_states(p);
  if (roots.size() > 1 && !branch) {
    std::ostringstream msg;
    msg << "missing required key 'branch': " << roots.size() << " steady states at E=" << p.pump;
    throw UsageError(msg.str());
  }
  return steady_state_on_branch(p, branch.value_or(Branch::Lower));
}

void write_series(const RunConfig& cfg, const SpectrumSeries<double>& s, const std::string& stem) {
  write_spectrum_csv(s, cfg.output / (stem + ".csv"));
  write_file_atomic(cfg.output / (stem + ".json"), metadata_json(cfg, s));
}

void report_warnings(const SpectrumSeries<double>& s, std::ostream& err) {
  for (const auto& w : s.warnings) err << "warning: " << s.name() << ": " << w << "\n";
}

void summarize(const SpectrumSeries<double>& s, std::ostream& out) {
  if (s.values.size() == 0) return;
  Eigen::Index k = 0;
  s.values.minCoeff(&k);
  out << s.name() << ": min " << fmt(s.values(k)) << " at omega " << fmt(s.omega(k));
  if (s.statErr.size() == s.values.size()) out << " +- " << fmt(s.statErr(k));
  out << "\n";
}

void warn_if_unstable(const SymmetricSteadyState<double>& s, const DimerParams<double>& p, std::ostream& err) {
  const int roots = static_cast<int>(solve_symmetric_steady_states(p).size());
  const auto c = classify(s, p, roots);
  if (c.tag != StabilityTag::StableSymmetric)
    err << "warning: the selected steady state is unstable (" << to_string(c) << "); linearized spectra do not apply\n";
}

int run_steady(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto p = resolve_pump(cfg, out);
  const auto states = solve_symmetric_steady_states(p);
  std::string table = "branch,i1,i2,phi1,phi2,stability,re_lambda,im_lambda\n";
  for (const auto& s : states) {
    const auto c = classify(s, p, static_cast<int>(states.size()));
    table += branch_label(p, s.i1) + "," + fmt(s.i1) + "," + fmt(s.i2) + "," + fmt(s.phi1) + "," + fmt(s.phi2) +
             "," + to_string(c) + "," + fmt(c.criticalEigenvalue.real()) + "," + fmt(c.criticalEigenvalue.imag()) +
             "\n";
  }
  out << table;
  write_file_atomic(cfg.output / "steady.csv", table);
  return 0;
}

int run_thresholds(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Branch b = cfg.branch.value_or(Branch::Lower);
  std::vector<ThresholdKind> kinds;
  if (cfg.bothKinds) kinds = {ThresholdKind::Hopf, ThresholdKind::Static};
  else kinds = {cfg.kind};
  std::string table = "kind,branch,threshold,class\n";
  for (const auto kind : kinds) {
    const char* name = kind == ThresholdKind::Hopf ? "hopf" : "static";
    std::string value = "none", cls = "none";
    try {
      const double e = locate_threshold(cfg.params, kind, b, 0.0, cfg.thresholdMax);
      value = fmt(e);
      DimerParams<double> above = cfg.params;
      above.pump = e * (1 + 1e-6);
      const auto s = steady_state_on_branch(above, b);
      cls = to_string(classify(s, above, static_cast<int>(solve_symmetric_steady_states(above).size())));
    } catch (const NoSignChange& e) {
      err << "warning: " << name << ": " << e.what() << "\n";
    } catch (const BranchAbsent& e) {
      // the branch ends in a fold before any instability of this kind
      value = fmt(e.foldPump);
      cls = "branch-end";
    }
    out << name << " threshold on the " << to_string(b) << " branch: " << value << " (" << cls << ")\n";
    table += std::string(name) + "," + to_string(b) + "," + value + "," + cls + "\n";
  }
  write_file_atomic(cfg.output / "thresholds.csv", table);
  return 0;
}

int run_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto cells = scan_bifurcation(cfg.scan, cfg.params);
  std::string table = std::string(to_string(cfg.scan.x.axis)) + "," + to_string(cfg.scan.y.axis) +
                      ",roots,region,threshold_pump,upper_branch,error\n";
  int failures = 0;
  for (const auto& c : cells) {
    std::string error = c.error;
    for (auto& ch : error)
      if (ch == ',' || ch == '\n') ch = ';';
    table += fmt(c.x) + "," + fmt(c.y) + "," + std::to_string(c.rootCount) + "," + to_string(c.region) + "," +
             (std::isnan(c.thresholdPump) ? std::string() : fmt(c.thresholdPump)) + "," +
             (c.upperBranch ? to_string(*c.upperBranch) : std::string()) + "," + error + "\n";
    if (c.region == Region::Error) {
      ++failures;
      err << "warning: cell (" << c.x << ", " << c.y << "): " << c.error << "\n";
    }
  }
  write_file_atomic(cfg.output / "scan.csv", table);
  out << cells.size() << " cells written, " << failures << " failed\n";
  return 0;
}

int run_analytic(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  RunConfig resolved = cfg;
  resolved.params = resolve_pump(cfg, out);
  const auto& p = resolved.params;
  const auto s = select_state(p, cfg.branch);
  warn_if_unstable(s, p, err);
  const Eigen::VectorXd grid = default_frequency_grid<double>(cfg.gridPoints, cfg.omegaMax);
  for (const auto& o : cfg.observables) {
    const auto series = analytic_spectrum(s, p, o.observable, o.sign, grid);
    report_warnings(series, err);
    write_series(resolved, series, o.name());
    summarize(series, out);
  }
  return 0;
}

std::vector<CorrelationAccumulator> simulate(const RunConfig& cfg, const DimerParams<double>& p,
                                             const SymmetricSteadyState<double>& s, std::ostream& err) {
  warn_if_unstable(s, p, err);
  return run_ensemble(*cfg.sim, p, s);
}

int run_sim(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  RunConfig resolved = cfg;
  resolved.params = resolve_pump(cfg, out);
  const auto& p = resolved.params;
  const auto s = select_state(p, cfg.branch);
  const auto ensemble = simulate(cfg, p, s, err);
  for (const auto& o : cfg.observables) {
    const auto series = estimate_spectra(ensemble, s, p, o.observable, o.sign, *cfg.sim);
    report_warnings(series, err);
    write_series(resolved, series, o.name());
    summarize(series, out);
  }
  return 0;
}

void print_verdict(const ObservableReport& r, std::ostream& out) {
  out << r.observable << ": " << r.verdict << " (" << r.pointsOutside << "/" << r.pointsCompared
      << " points outside, analytic min " << fmt(r.analyticMin) << " at " << fmt(r.analyticArgmin)
      << ", simulated min " << fmt(r.simulatedMin) << " +- " << fmt(r.simulatedMinErr) << " at "
      << fmt(r.simulatedArgmin) << ")\n";
}

int run_compare_files(const RunConfig& cfg, std::ostream& out) {
  auto analytic = read_spectrum_csv(*cfg.analyticCsv);
  auto simulated = read_spectrum_csv(*cfg.simCsv);
  auto sidecar = *cfg.simCsv;
  sidecar.replace_extension(".json");
  std::string name = cfg.simCsv->stem().string();
  if (std::ifstream in(sidecar); in) {
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.contains("observable")) name = j["observable"].get<std::string>();
  }
  auto r = compute_verdict(analytic, simulated, cfg.sigmaLimit, cfg.compareBand);
  r.observable = name;
  print_verdict(r, out);
  out << "verdict: " << r.verdict << "\n";
  return 0;
}

int run_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.analyticCsv) return run_compare_files(cfg, out);
  RunConfig resolved = cfg;
  resolved.params = resolve_pump(cfg, out);
  const auto& p = resolved.params;
  const auto s = select_state(p, cfg.branch);
  const auto ensemble = simulate(cfg, p, s, err);
  const Eigen::VectorXd grid = simulation_frequency_grid(*cfg.sim);

  ReportRecord report;
  for (const auto& o : cfg.observables) {
    const auto sim = estimate_spectra(ensemble, s, p, o.observable, o.sign, *cfg.sim);
    const auto analytic = analytic_spectrum(s, p, o.observable, o.sign, grid);
    report_warnings(sim, err);
    report_warnings(analytic, err);
    write_series(resolved, sim, "sim_" + o.name());
    write_series(resolved, analytic, "analytic_" + o.name());
    report.observables.push_back(compute_verdict(analytic, sim, cfg.sigmaLimit, cfg.compareBand));
    print_verdict(report.observables.back(), out);
  }
  auto meta = nlohmann::ordered_json::parse(metadata_json(resolved, SpectrumSeries<double>{}));
  meta.erase("observable");
  meta.erase("shot_noise");
  meta.erase("points");
  meta.erase("warnings");
  meta["sigma_limit"] = cfg.sigmaLimit;
  meta["band"] = cfg.compareBand;
  meta["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                  std::to_string(EIGEN_MINOR_VERSION);
  report.metadata = meta.dump();
  write_file_atomic(cfg.output / "report.json", report_json(report));
  out << "verdict: " << report.overall() << "\n";
  return 0;
}

}  // namespace

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  switch (cfg.command) {
    case Command::Steady: return run_steady(cfg, out, err);
    case Command::Thresholds: return run_thresholds(cfg, out, err);
    case Command::Scan: return run_scan(cfg, out, err);
    case Command::SpectrumAnalytic: return run_analytic(cfg, out, err);
    case Command::SpectrumSim: return run_sim(cfg, out, err);
    case Command::Compare: return run_compare(cfg, out, err);
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run_command(parse_config(args), out, err);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const UsageError& e) {
    err << e.what();
    if (std::string_view(e.what()).ends_with("\n") == false) err << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qdimer::io
