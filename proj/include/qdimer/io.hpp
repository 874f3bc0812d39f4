#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdimer/model.hpp"
#include "qdimer/spectra.hpp"
#include "qdimer/stability.hpp"
#include "qdimer/wigner.hpp"

namespace qdimer::io {

// bad command line or config file; exit code 2
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --help or --version; the text goes to stdout with exit code 0
struct HelpRequested {
  std::string text;
};

enum class Command { Steady, Scan, SpectrumAnalytic, SpectrumSim, Thresholds, Compare };

const char* to_string(Command c);

struct ObservableSelection {
  Observable observable = Observable::A1B1;
  Sign sign = Sign::Plus;

  std::string name() const;
};

// accepts a1b1+, a1b1-, a1b1_plus, a1, a2, ...
ObservableSelection parse_observable(const std::string& text);

struct RunConfig {
  Command command = Command::Steady;
  DimerParams<double> params;
  std::optional<SimConfig> sim;
  ScanPlane<double> scan;
  std::vector<ObservableSelection> observables;
  std::optional<Branch> branch;
  ThresholdKind kind = ThresholdKind::Hopf;
  bool bothKinds = false;
  double thresholdMax = 200;
  // pump given as a fraction of a located threshold instead of an absolute value
  std::optional<double> pumpFraction;
  ThresholdKind pumpReference = ThresholdKind::Hopf;
  int gridPoints = 512;
  double omegaMax = 20;
  double sigmaLimit = 3;
  double compareBand = 10;
  std::filesystem::path output = ".";
  std::optional<std::filesystem::path> analyticCsv;
  std::optional<std::filesystem::path> simCsv;
  std::uint64_t seed = 1;
};

// args exclude the program name; throws UsageError
RunConfig parse_config(const std::vector<std::string>& args);

std::string usage();

// reads flat `key = value` lines, `#` starts a comment
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

// CSV with header omega,vbar[,stat_err]
void write_spectrum_csv(const SpectrumSeries<double>& series, const std::filesystem::path& path);
SpectrumSeries<double> read_spectrum_csv(const std::filesystem::path& path);

// writes `contents` to a temporary sibling and renames it over `path`
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string metadata_json(const RunConfig& cfg, const SpectrumSeries<double>& series);

struct ObservableReport {
  std::string observable;
  double analyticMin = 0;
  double analyticArgmin = 0;
  double simulatedMin = 0;
  double simulatedMinErr = 0;
  double simulatedArgmin = 0;
  int pointsCompared = 0;
  int pointsOutside = 0;
  double maxDeviationSigma = 0;
  int argminBinOffset = 0;
  std::string verdict;
};

// pointwise agreement within sigmaLimit * stat_err on 0 <= w <= band, and matching dips to one bin
ObservableReport compute_verdict(const SpectrumSeries<double>& analytic, const SpectrumSeries<double>& simulated,
                                 double sigmaLimit, double band);

struct ReportRecord {
  std::vector<ObservableReport> observables;
  std::string metadata;  // JSON object text
  std::string overall() const;
};

std::string report_json(const ReportRecord& r);

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// full front end: parses, runs, maps errors to exit codes 0/1/2
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdimer::io
