#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qdimer/io.hpp"

namespace qdimer::io {

const char* to_string(Command c) {
  switch (c) {
    case Command::Steady: return "steady";
    case Command::Scan: return "scan";
    case Command::SpectrumAnalytic: return "spectrum-analytic";
    case Command::SpectrumSim: return "spectrum-sim";
    case Command::Thresholds: return "thresholds";
    case Command::Compare: return "compare";
  }
  return "?";
}

std::string ObservableSelection::name() const {
  if (is_monomer(observable)) return to_string(observable);
  return std::string(to_string(observable)) + "_" + to_string(sign);
}

ObservableSelection parse_observable(const std::string& text) {
  std::string t;
  for (char ch : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  ObservableSelection sel;
  std::string base = t;
  if (t.ends_with("+") || t.ends_with("_plus")) {
    base = t.substr(0, t.ends_with("+") ? t.size() - 1 : t.size() - 5);
  } else if (t.ends_with("-") || t.ends_with("_minus")) {
    sel.sign = Sign::Minus;
    base = t.substr(0, t.ends_with("-") ? t.size() - 1 : t.size() - 6);
  }
  static const std::map<std::string, Observable> names = {
      {"a1a2", Observable::A1A2}, {"a1b2", Observable::A1B2}, {"a1b1", Observable::A1B1},
      {"a2b2", Observable::A2B2}, {"a1", Observable::A1},     {"a2", Observable::A2}};
  const auto it = names.find(base);
  if (it == names.end()) throw UsageError("unknown observable '" + text + "'");
  sel.observable = it->second;
  const bool signed_ = base != t;
  if (is_monomer(sel.observable) && signed_) throw UsageError("observable '" + text + "' takes no sign");
  if (!is_monomer(sel.observable) && !signed_) throw UsageError("observable '" + text + "' needs a sign (+ or -)");
  return sel;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << path.string() << ":" << number << ": expected `key = value`";
      throw UsageError(msg.str());
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      std::ostringstream msg;
      msg << path.string() << ":" << number << ": empty key or value";
      throw UsageError(msg.str());
    }
    out.emplace_back(key, value);
  }
  return out;
}

namespace {

struct Raw {
  double gamma = 0, delta = 0, delta1 = 0, delta2 = 0, j1 = 0, j2 = 0, pump = 0, ns = 1e8;
  double pumpFraction = 0;
  std::string pumpReference = "hopf";
  std::string branch;
  std::string kind = "hopf";
  double thresholdMax = 200;
  std::vector<std::string> observables;
  int points = 512;
  double omegaMax = 20;
  std::string output = ".";
  std::uint64_t seed = 1;
  SimConfig sim;
  std::string estimator = "linear";
  std::string mean = "classical";
  double sigma = 3, band = 10;
  std::string analyticCsv, simCsv;
  std::string xAxis = "delta", yAxis = "j1";
  double xMin = 0, xMax = 1, yMin = 0, yMax = 1;
  int xCount = 11, yCount = 11;
  double pumpMax = 100;
  int pumpSteps = 400;
  std::string config;
};

struct Sub {
  Command command;
  CLI::App* app;
};

void add_physics(CLI::App* s, Raw& r, bool pump) {
  s->add_option("--gamma", r.gamma, "SH to FH loss ratio");
  s->add_option("--delta", r.delta, "shared detuning, sets delta1 and delta2");
  s->add_option("--delta1", r.delta1, "FH detuning");
  s->add_option("--delta2", r.delta2, "SH detuning");
  s->add_option("--j1", r.j1, "FH coupling");
  s->add_option("--j2", r.j2, "SH coupling");
  s->add_option("--ns", r.ns, "noise strength parameter")->capture_default_str();
  if (pump) {
    auto* p = s->add_option("--pump", r.pump, "pump amplitude E");
    auto* f = s->add_option("--pump-fraction", r.pumpFraction, "pump as a fraction of the threshold");
    p->excludes(f);
    s->add_option("--pump-reference", r.pumpReference, "threshold for --pump-fraction")
        ->check(CLI::IsMember({"hopf", "static"}))
        ->capture_default_str();
    s->add_option("--branch", r.branch, "steady-state branch")->check(CLI::IsMember({"lower", "middle", "upper"}));
    s->add_option("--e-max", r.thresholdMax, "largest pump searched for the reference threshold")
        ->capture_default_str();
  }
}

void add_spectrum(CLI::App* s, Raw& r, bool analyticGrid) {
  s->add_option("--observable", r.observables, "e.g. a1b1+, a2b2-, a1")->delimiter(',');
  if (analyticGrid) {
    s->add_option("--points", r.points, "frequency grid size")->capture_default_str();
    s->add_option("--omega-max", r.omegaMax, "grid half-width")->capture_default_str();
  }
}

void add_sim(CLI::App* s, Raw& r) {
  s->add_option("--dt", r.sim.dt)->capture_default_str();
  s->add_option("--window-steps", r.sim.windowSteps, "steps averaged per output sample")->capture_default_str();
  s->add_option("--lags", r.sim.lagCount, "number of correlation lags N")->capture_default_str();
  s->add_option("--lag-stride", r.sim.lagStride, "windows per lag")->capture_default_str();
  s->add_option("--total-time", r.sim.totalTime, "sampled time summed over trajectories")->capture_default_str();
  s->add_option("--transient", r.sim.transientTime, "discarded time per trajectory")->capture_default_str();
  s->add_option("--trajectories", r.sim.trajectories)->capture_default_str();
  s->add_option("--threads", r.sim.threads, "0 uses all cores")->capture_default_str();
  s->add_option("--estimator", r.estimator)->check(CLI::IsMember({"linear", "quadratic"}))->capture_default_str();
  s->add_option("--mean", r.mean, "mean subtracted from the outputs")
      ->check(CLI::IsMember({"classical", "empirical"}))
      ->capture_default_str();
  s->add_flag("--hann", r.sim.hannTaper, "taper the lag window");
  s->add_option("--seed", r.seed)->envname("QDIMER_SEED")->capture_default_str();
}

Axis parse_axis(const std::string& name, const char* key) {
  static const std::map<std::string, Axis> axes = {{"delta", Axis::Delta}, {"j1", Axis::J1}, {"j2", Axis::J2},
                                                   {"pump", Axis::Pump},   {"gamma", Axis::Gamma}};
  const auto it = axes.find(name);
  if (it == axes.end()) throw UsageError(std::string("--") + key + ": unknown axis '" + name + "'");
  return it->second;
}

// explicit command-line keys, used to drop config-file entries they override
std::set<std::string> explicit_keys(const std::vector<std::string>& tokens) {
  std::set<std::string> keys;
  for (const auto& t : tokens) {
    if (!t.starts_with("--")) continue;
    keys.insert(t.substr(2, t.find('=') == std::string::npos ? std::string::npos : t.find('=') - 2));
  }
  if (keys.count("delta")) keys.insert({"delta1", "delta2"});
  if (keys.count("pump")) keys.insert("pump-fraction");
  if (keys.count("pump-fraction")) keys.insert("pump");
  return keys;
}

}  // namespace

std::string usage() {
  return "usage: qdimer <command> [options]\n"
         "commands: steady, scan, spectrum-analytic, spectrum-sim, thresholds, compare\n"
         "run `qdimer <command> --help` for the options of a command\n";
}

RunConfig parse_config(const std::vector<std::string>& args) {
  if (args.empty()) throw UsageError(usage());

  Raw r;
  CLI::App app{"Coupled-waveguide SHG dimer: steady states, stability, and output spectra", "qdimer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QDIMER_VERSION));

  std::vector<Sub> subs;
  auto make = [&](Command c, const char* help) {
    auto* s = app.add_subcommand(to_string(c), help);
    s->add_option("--config", r.config, "flat `key = value` config file");
    s->add_option("--output", r.output, "output directory")->capture_default_str();
    subs.push_back({c, s});
    return s;
  };

  auto* steady = make(Command::Steady, "list symmetric steady states and their stability");
  add_physics(steady, r, true);

  auto* thresholds = make(Command::Thresholds, "locate instability thresholds in the pump");
  add_physics(thresholds, r, false);
  thresholds->add_option("--kind", r.kind)->check(CLI::IsMember({"hopf", "static", "both"}))->capture_default_str();
  thresholds->add_option("--branch", r.branch)->check(CLI::IsMember({"lower", "middle", "upper"}));
  thresholds->add_option("--e-max", r.thresholdMax, "largest pump searched")->capture_default_str();

  auto* scan = make(Command::Scan, "stability map over two parameters");
  add_physics(scan, r, false);
  scan->add_option("--x-axis", r.xAxis)->capture_default_str();
  scan->add_option("--x-min", r.xMin);
  scan->add_option("--x-max", r.xMax);
  scan->add_option("--x-count", r.xCount)->capture_default_str();
  scan->add_option("--y-axis", r.yAxis)->capture_default_str();
  scan->add_option("--y-min", r.yMin);
  scan->add_option("--y-max", r.yMax);
  scan->add_option("--y-count", r.yCount)->capture_default_str();
  scan->add_option("--pump", r.pump, "fixed pump when neither axis is the pump");
  scan->add_option("--pump-max", r.pumpMax, "pump sweep limit")->capture_default_str();
  scan->add_option("--pump-steps", r.pumpSteps)->capture_default_str();

  auto* analytic = make(Command::SpectrumAnalytic, "linearized output spectra");
  add_physics(analytic, r, true);
  add_spectrum(analytic, r, true);

  auto* sim = make(Command::SpectrumSim, "truncated Wigner simulation of output spectra");
  add_physics(sim, r, true);
  add_spectrum(sim, r, false);
  add_sim(sim, r);

  auto* compare = make(Command::Compare, "simulated against analytic spectra with a verdict");
  add_physics(compare, r, true);
  add_spectrum(compare, r, false);
  add_sim(compare, r);
  compare->add_option("--sigma", r.sigma, "allowed deviation in units of stat_err")->capture_default_str();
  compare->add_option("--band", r.band, "compare 0 <= omega <= band")->capture_default_str();
  compare->add_option("--analytic-csv", r.analyticCsv, "compare two existing CSV files instead of running");
  compare->add_option("--sim-csv", r.simCsv);

  // splice config-file entries in right after the subcommand
  std::vector<std::string> tokens = args;
  const auto subPos = std::find_if(tokens.begin(), tokens.end(), [&](const std::string& t) {
    return std::any_of(subs.begin(), subs.end(), [&](const Sub& s) { return s.app->get_name() == t; });
  });
  if (subPos != tokens.end()) {
    const auto* subApp =
        std::find_if(subs.begin(), subs.end(), [&](const Sub& s) { return s.app->get_name() == *subPos; })->app;
    std::optional<std::string> configPath;
    for (auto it = subPos + 1; it != tokens.end(); ++it) {
      if (*it == "--config" && it + 1 != tokens.end()) configPath = *(it + 1);
      else if (it->starts_with("--config=")) configPath = it->substr(9);
    }
    if (configPath) {
      const auto given = explicit_keys({subPos + 1, tokens.end()});
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_config_file(*configPath)) {
        if (key == "config" || key == "help" || !subApp->get_option_no_throw("--" + key))
          throw UsageError("unknown config key '" + key + "' for " + subApp->get_name());
        if (given.count(key)) continue;
        injected.push_back("--" + key + "=" + value);
      }
      tokens.insert(subPos + 1, injected.begin(), injected.end());
    }
  }

  std::vector<std::string> reversed(tokens.rbegin(), tokens.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help()};
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested{std::string(QDIMER_VERSION) + "\n"};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  const auto chosen = std::find_if(subs.begin(), subs.end(), [](const Sub& s) { return s.app->parsed(); });
  RunConfig cfg;
  cfg.command = chosen->command;
  CLI::App* s = chosen->app;
  auto given = [&](const std::string& key) {
    const auto* o = s->get_option_no_throw("--" + key);
    return o && o->count() > 0;
  };

  std::set<std::string> optional;
  if (cfg.command == Command::Scan) {
    optional.insert(r.xAxis);
    optional.insert(r.yAxis);
  }
  const bool fromFiles = cfg.command == Command::Compare && (given("analytic-csv") || given("sim-csv"));
  if (fromFiles) {
    if (!given("analytic-csv") || !given("sim-csv"))
      throw UsageError("--analytic-csv and --sim-csv must be given together");
    cfg.analyticCsv = r.analyticCsv;
    cfg.simCsv = r.simCsv;
  }
  auto require = [&](const std::string& key) {
    if (!fromFiles && !optional.count(key) && !given(key)) throw UsageError("missing required key '" + key + "'");
  };

  require("gamma");
  require("j1");
  require("j2");
  if (!optional.count("delta") && !given("delta") && !(given("delta1") && given("delta2")) && !fromFiles)
    throw UsageError("missing required key 'delta' (or both 'delta1' and 'delta2')");

  auto& p = cfg.params;
  p.gamma = r.gamma;
  p.delta1 = given("delta1") ? r.delta1 : r.delta;
  p.delta2 = given("delta2") ? r.delta2 : r.delta;
  p.j1 = r.j1;
  p.j2 = r.j2;
  p.pump = r.pump;
  p.ns = r.ns;
  if (optional.count("gamma")) p.gamma = 1;  // set per cell

  const bool needsPump = cfg.command == Command::Steady || cfg.command == Command::SpectrumAnalytic ||
                         cfg.command == Command::SpectrumSim || cfg.command == Command::Compare;
  if (needsPump && !fromFiles) {
    if (given("pump-fraction")) {
      if (!(r.pumpFraction > 0)) throw UsageError("--pump-fraction must be positive");
      cfg.pumpFraction = r.pumpFraction;
      cfg.pumpReference = r.pumpReference == "static" ? ThresholdKind::Static : ThresholdKind::Hopf;
    } else {
      require("pump");
    }
  }
  if (cfg.command == Command::Scan && !optional.count("pump") && given("pump"))
    throw UsageError("--pump is only used when an axis is 'pump'; the scan sweeps the pump otherwise");
  if (!fromFiles) {
    try {
      validate(p);
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("invalid parameter: ") + e.what());
    }
  }

  if (!r.branch.empty()) cfg.branch = r.branch == "lower" ? Branch::Lower : r.branch == "middle" ? Branch::Middle
                                                                                                 : Branch::Upper;
  if (cfg.command == Command::Thresholds) {
    cfg.bothKinds = r.kind == "both";
    cfg.kind = r.kind == "static" ? ThresholdKind::Static : ThresholdKind::Hopf;
  }
  if (!(r.thresholdMax > 0)) throw UsageError("--e-max must be positive");
  cfg.thresholdMax = r.thresholdMax;

  if (cfg.command == Command::Scan) {
    const Axis x = parse_axis(r.xAxis, "x-axis"), y = parse_axis(r.yAxis, "y-axis");
    if (x == y) throw UsageError("--x-axis and --y-axis must differ");
    for (const char* key : {"x-min", "x-max", "y-min", "y-max"}) require(key);
    if (r.xCount < 1 || r.yCount < 1) throw UsageError("--x-count and --y-count must be >= 1");
    if (r.pumpSteps < 1 || !(r.pumpMax > 0)) throw UsageError("--pump-max and --pump-steps must be positive");
    cfg.scan.x = {x, r.xMin, r.xMax, r.xCount};
    cfg.scan.y = {y, r.yMin, r.yMax, r.yCount};
    cfg.scan.pumpMax = r.pumpMax;
    cfg.scan.pumpSteps = r.pumpSteps;
  }

  const bool spectral = cfg.command == Command::SpectrumAnalytic || cfg.command == Command::SpectrumSim ||
                        cfg.command == Command::Compare;
  if (spectral) {
    const std::vector<std::string> names =
        r.observables.empty() ? std::vector<std::string>{"a1b1+", "a1b1-", "a2b2+", "a2b2-"} : r.observables;
    for (const auto& n : names) cfg.observables.push_back(parse_observable(n));
    if (r.points < 2) throw UsageError("--points must be >= 2");
    if (!(r.omegaMax > 0)) throw UsageError("--omega-max must be positive");
    cfg.gridPoints = r.points;
    cfg.omegaMax = r.omegaMax;
  }
  if (cfg.command == Command::SpectrumSim || cfg.command == Command::Compare) {
    SimConfig sc = r.sim;
    sc.estimator = r.estimator == "quadratic" ? SimConfig::Estimator::Quadratic : SimConfig::Estimator::Linearized;
    sc.meanMode = r.mean == "empirical" ? SimConfig::MeanMode::Empirical : SimConfig::MeanMode::Classical;
    sc.seed = r.seed;
    try {
      validate(sc);
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("invalid simulation setting: ") + e.what());
    }
    cfg.sim = sc;
    cfg.seed = r.seed;
  }
  if (cfg.command == Command::Compare) {
    if (!(r.sigma > 0) || !(r.band > 0)) throw UsageError("--sigma and --band must be positive");
    cfg.sigmaLimit = r.sigma;
    cfg.compareBand = r.band;
  }
  cfg.output = r.output;
  return cfg;
}

}  // namespace qdimer::io
