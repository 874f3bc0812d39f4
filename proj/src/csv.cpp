#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdimer/io.hpp"

namespace qdimer::io {

namespace {

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s, const std::filesystem::path& path, int line) {
  double v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": malformed number '" << s << "'";
    throw std::runtime_error(msg.str());
  }
  return v;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_spectrum_csv(const SpectrumSeries<double>& series, const std::filesystem::path& path) {
  const bool err = series.statErr.size() > 0;
  if (series.values.size() != series.omega.size() || (err && series.statErr.size() != series.omega.size()))
    throw InvalidArgument("spectrum columns differ in length");
  std::string text = err ? "omega,vbar,stat_err\n" : "omega,vbar\n";
  for (Eigen::Index i = 0; i < series.omega.size(); ++i) {
    if (!std::isfinite(series.omega(i)) || !std::isfinite(series.values(i)) || (err && !std::isfinite(series.statErr(i))))
      throw InvalidArgument("spectrum contains a non-finite value");
    text += format17(series.omega(i)) + "," + format17(series.values(i));
    if (err) text += "," + format17(series.statErr(i));
    text += "\n";
  }
  write_file_atomic(path, text);
}

SpectrumSeries<double> read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const bool err = line == "omega,vbar,stat_err";
  if (!err && line != "omega,vbar") throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");

  std::vector<double> w, v, e;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != (err ? 3u : 2u)) {
      std::ostringstream msg;
      msg << path.string() << ":" << number << ": expected " << (err ? 3 : 2) << " columns";
      throw std::runtime_error(msg.str());
    }
    w.push_back(parse_double(cells[0], path, number));
    v.push_back(parse_double(cells[1], path, number));
    if (err) e.push_back(parse_double(cells[2], path, number));
  }
  SpectrumSeries<double> s;
  s.omega = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  s.values = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  if (err) s.statErr = Eigen::Map<Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
  return s;
}

std::string metadata_json(const RunConfig& cfg, const SpectrumSeries<double>& series) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["program"] = "qdimer";
  j["version"] = QDIMER_VERSION;
  j["command"] = to_string(cfg.command);
  j["observable"] = series.name();
  const auto& p = cfg.params;
  j["params"] = {{"gamma", p.gamma}, {"delta1", p.delta1}, {"delta2", p.delta2}, {"j1", p.j1},
                 {"j2", p.j2},       {"pump", p.pump},     {"ns", p.ns}};
  if (cfg.pumpFraction)
    j["pump_fraction"] = {{"fraction", *cfg.pumpFraction},
                          {"reference", cfg.pumpReference == ThresholdKind::Hopf ? "hopf" : "static"}};
  j["branch"] = to_string(cfg.branch.value_or(Branch::Lower));
  j["shot_noise"] = series.shotNoise;
  j["points"] = series.omega.size();
  if (cfg.sim) {
    const auto& s = *cfg.sim;
    j["seed"] = cfg.seed;
    j["sim"] = {{"dt", s.dt},
                {"window_steps", s.windowSteps},
                {"lags", s.lagCount},
                {"lag_stride", s.lagStride},
                {"total_time", s.totalTime},
                {"transient", s.transientTime},
                {"trajectories", s.trajectories},
                {"estimator", s.estimator == SimConfig::Estimator::Quadratic ? "quadratic" : "linear"},
                {"mean", s.meanMode == SimConfig::MeanMode::Empirical ? "empirical" : "classical"},
                {"hann", s.hannTaper}};
  } else {
    j["grid"] = {{"points", cfg.gridPoints}, {"omega_max", cfg.omegaMax}};
  }
  j["warnings"] = series.warnings;
  return j.dump(2) + "\n";
}

}  // namespace qdimer::io
