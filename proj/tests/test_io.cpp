#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "qdimer/io.hpp"

using namespace qdimer;
using namespace qdimer::io;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qdimer_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path kConfigs = QDIMER_CONFIG_DIR;

}  // namespace

TEST_CASE("spectrum CSV layout and bit-exact round trip") {
  const auto dir = scratch("csv");
  SpectrumSeries<double> s;
  s.omega = default_frequency_grid<double>(512, 20.0);
  s.values = Eigen::VectorXd::Random(512).array() + 1.0;
  s.values(3) = 1e-300;
  s.values(4) = 0.1;
  s.values(5) = 1.0 / 3.0;
  write_spectrum_csv(s, dir / "a.csv");
  const auto text = slurp(dir / "a.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 513);
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.starts_with("omega,vbar\n"));
  const auto back = read_spectrum_csv(dir / "a.csv");
  CHECK(back.omega == s.omega);
  CHECK(back.values == s.values);
  CHECK(back.statErr.size() == 0);

  s.statErr = Eigen::VectorXd::Random(512).cwiseAbs();
  write_spectrum_csv(s, dir / "b.csv");
  CHECK(slurp(dir / "b.csv").starts_with("omega,vbar,stat_err\n"));
  CHECK(read_spectrum_csv(dir / "b.csv").statErr == s.statErr);
  CHECK_FALSE(fs::exists(dir / "b.csv.tmp"));

  s.values(0) = std::nan("");
  CHECK_THROWS_AS(write_spectrum_csv(s, dir / "c.csv"), InvalidArgument);

  std::ofstream(dir / "bad.csv") << "omega,vbar\n1,2x\n";
  CHECK_THROWS_WITH(read_spectrum_csv(dir / "bad.csv"), doctest::Contains("bad.csv:2"));
}

TEST_CASE("usage and validation errors exit with code 2") {
  const auto empty = cli({});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("usage: qdimer") != std::string::npos);

  const auto negative = cli({"spectrum-analytic", "--gamma", "0.1", "--delta", "0", "--j1", "3", "--j2", "1",
                             "--pump", "-1"});
  CHECK(negative.code == 2);
  CHECK(negative.err.find("pump") != std::string::npos);

  const auto malformed = cli({"steady", "--gamma", "0.1x", "--delta", "0", "--j1", "3", "--j2", "1", "--pump", "1"});
  CHECK(malformed.code == 2);
  CHECK(malformed.err.find("--gamma") != std::string::npos);

  const auto missing = cli({"steady", "--gamma", "0.1", "--delta", "0", "--j2", "1", "--pump", "1"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("'j1'") != std::string::npos);

  const auto conflict = cli({"steady", "--gamma", "0.1", "--delta", "0", "--j1", "1", "--j2", "1", "--pump", "1",
                             "--pump-fraction", "0.5"});
  CHECK(conflict.code == 2);

  const auto bogus = cli({"frobnicate"});
  CHECK(bogus.code == 2);

  const auto help = cli({"steady", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--pump") != std::string::npos);
}

TEST_CASE("parsed configuration matches the requested bistable spectrum") {
  const auto cfg = parse_config({"spectrum-analytic", "--gamma", "0.1", "--delta", "0", "--j1", "3", "--j2", "1",
                                 "--pump", "3.275", "--branch", "lower"});
  CHECK(cfg.command == Command::SpectrumAnalytic);
  CHECK(cfg.params.gamma == 0.1);
  CHECK(cfg.params.delta1 == 0.0);
  CHECK(cfg.params.delta2 == 0.0);
  CHECK(cfg.params.j1 == 3.0);
  CHECK(cfg.params.j2 == 1.0);
  CHECK(cfg.params.pump == 3.275);
  CHECK(cfg.params.ns == 1e8);
  REQUIRE(cfg.branch);
  CHECK(*cfg.branch == Branch::Lower);
  CHECK(cfg.observables.size() == 4);
  CHECK_FALSE(cfg.sim);
}

TEST_CASE("shared detuning shorthand and individual overrides") {
  auto cfg = parse_config({"steady", "--gamma", "1", "--delta", "0.5", "--j1", "1", "--j2", "1", "--pump", "1"});
  CHECK(cfg.params.delta1 == 0.5);
  CHECK(cfg.params.delta2 == 0.5);
  cfg = parse_config(
      {"steady", "--gamma", "1", "--delta", "0.5", "--delta2", "-1", "--j1", "1", "--j2", "1", "--pump", "1"});
  CHECK(cfg.params.delta1 == 0.5);
  CHECK(cfg.params.delta2 == -1.0);
}

TEST_CASE("observable names") {
  CHECK(parse_observable("a1b1+").name() == "a1b1_plus");
  CHECK(parse_observable("A2B2-").sign == Sign::Minus);
  CHECK(parse_observable("a1a2_minus").observable == Observable::A1A2);
  CHECK(parse_observable("a2").name() == "a2");
  CHECK_THROWS_AS(parse_observable("a1b1"), UsageError);
  CHECK_THROWS_AS(parse_observable("a1+"), UsageError);
  CHECK_THROWS_AS(parse_observable("b7+"), UsageError);
}

TEST_CASE("config files: comments, unknown keys, command-line precedence") {
  const auto dir = scratch("conf");
  std::ofstream(dir / "a.conf") << "# comment\ngamma = 0.1   # trailing\n\ndelta=0\nj1 = 3\nj2 = 1\npump = 3.275\n";
  auto cfg = parse_config({"steady", "--config", (dir / "a.conf").string()});
  CHECK(cfg.params.gamma == 0.1);
  CHECK(cfg.params.pump == 3.275);
  cfg = parse_config({"steady", "--pump", "2", "--config", (dir / "a.conf").string(), "--j1", "4"});
  CHECK(cfg.params.pump == 2.0);
  CHECK(cfg.params.j1 == 4.0);
  cfg = parse_config({"steady", "--config", (dir / "a.conf").string(), "--pump-fraction", "0.5"});
  REQUIRE(cfg.pumpFraction);
  CHECK(*cfg.pumpFraction == 0.5);

  std::ofstream(dir / "b.conf") << "gamma = 0.1\nwobble = 3\n";
  const auto unknown = cli({"steady", "--config", (dir / "b.conf").string()});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("'wobble'") != std::string::npos);

  std::ofstream(dir / "c.conf") << "gamma 0.1\n";
  CHECK(cli({"steady", "--config", (dir / "c.conf").string()}).code == 2);
  CHECK(cli({"steady", "--config", (dir / "missing.conf").string()}).code == 2);
}

TEST_CASE("golden configs express every figure parameter set") {
  struct Golden {
    const char* file;
    Command command;
  };
  const Golden all[] = {{"scan_delta_j1.conf", Command::Scan},
                        {"bistable_j1_3.conf", Command::SpectrumAnalytic},
                        {"bistable_j1_2.conf", Command::SpectrumAnalytic},
                        {"asymmetric_edge.conf", Command::SpectrumAnalytic},
                        {"selfpulsing_gamma1.conf", Command::SpectrumAnalytic},
                        {"selfpulsing_gamma10.conf", Command::SpectrumAnalytic},
                        {"compare_gamma1.conf", Command::Compare}};
  for (const auto& g : all) {
    CAPTURE(g.file);
    const auto cfg = parse_config({to_string(g.command), "--config", (kConfigs / g.file).string()});
    CHECK(cfg.command == g.command);
  }

  const auto bistable = parse_config({"spectrum-analytic", "--config", (kConfigs / "bistable_j1_3.conf").string()});
  CHECK(bistable.params.j1 == 3.0);
  CHECK(bistable.params.pump == 3.275);
  const auto edge = parse_config({"spectrum-analytic", "--config", (kConfigs / "asymmetric_edge.conf").string()});
  CHECK(edge.params.delta1 == 1.1);
  CHECK(edge.params.delta2 == 1.1);
  REQUIRE(edge.pumpFraction);
  CHECK(*edge.pumpFraction == 0.97);
  CHECK(edge.pumpReference == ThresholdKind::Static);

  const auto dir = scratch("golden");
  for (const char* f : {"bistable_j1_3.conf", "bistable_j1_2.conf", "asymmetric_edge.conf", "selfpulsing_gamma1.conf",
                        "selfpulsing_gamma10.conf"}) {
    CAPTURE(f);
    const auto out = dir / fs::path(f).stem();
    const auto r = cli({"spectrum-analytic", "--config", (kConfigs / f).string(), "--output", out.string()});
    CHECK(r.code == 0);
    CHECK(fs::exists(out / "a1b1_plus.csv"));
    CHECK(fs::exists(out / "a1b1_plus.json"));
  }
  const auto meta = nlohmann::json::parse(slurp(dir / "selfpulsing_gamma1" / "a2b2_plus.json"));
  CHECK(meta["params"]["pump"].get<double>() == doctest::Approx(0.95 * 19.9306).epsilon(1e-4));
  CHECK(meta["pump_fraction"]["reference"] == "hopf");
}

TEST_CASE("branch is required when several steady states coexist") {
  const std::vector<std::string> base = {"spectrum-analytic", "--gamma", "0.1", "--delta", "0", "--j1", "3", "--j2",
                                         "1", "--pump", "3.275", "--output", scratch("branch").string()};
  const auto r = cli(base);
  CHECK(r.code == 2);
  CHECK(r.err.find("branch") != std::string::npos);
  auto withBranch = base;
  withBranch.insert(withBranch.end(), {"--branch", "upper"});
  CHECK(cli(withBranch).code == 0);
}

TEST_CASE("steady and thresholds commands") {
  const auto dir = scratch("thr");
  const auto t = cli({"thresholds", "--gamma", "0.1", "--delta", "0", "--j1", "2", "--j2", "1", "--kind", "hopf",
                      "--output", dir.string()});
  CHECK(t.code == 0);
  const auto table = slurp(dir / "thresholds.csv");
  const auto line = table.substr(table.find("hopf,"));
  const double e = std::stod(line.substr(line.find(',', 5) + 1));
  CHECK(e == doctest::Approx(4.7).epsilon(0.05 / 4.7));

  const auto s = cli({"steady", "--gamma", "0.1", "--delta", "0", "--j1", "3", "--j2", "1", "--pump", "3.275",
                      "--output", dir.string()});
  CHECK(s.code == 0);
  const auto st = slurp(dir / "steady.csv");
  CHECK(std::count(st.begin(), st.end(), '\n') == 4);
  CHECK(st.find("middle") != std::string::npos);
  CHECK(st.find("fold") != std::string::npos);
}

TEST_CASE("scan writes a grid and reports failed cells without failing") {
  const auto dir = scratch("scan");
  const auto r = cli({"scan", "--config", (kConfigs / "scan_delta_j1.conf").string(), "--x-count", "6", "--y-count",
                      "4", "--pump-steps", "100", "--output", dir.string()});
  CHECK(r.code == 0);
  const auto text = slurp(dir / "scan.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 25);
  CHECK(text.starts_with("delta,j1,"));

  const auto bad = cli({"scan", "--delta", "0", "--j1", "1", "--j2", "1", "--x-axis", "gamma", "--x-min", "-1",
                        "--x-max", "1", "--x-count", "3", "--y-axis", "pump", "--y-min", "1", "--y-max", "2",
                        "--y-count", "2", "--output", dir.string()});
  CHECK(bad.code == 0);
  CHECK(bad.err.find("warning: cell") != std::string::npos);
  CHECK(slurp(dir / "scan.csv").find(",error,") != std::string::npos);
}

TEST_CASE("simulated spectra are byte-identical for a fixed seed") {
  const std::vector<std::string> base = {"spectrum-sim", "--gamma", "1", "--delta", "0", "--j1", "0.5", "--j2",
                                         "0.5", "--pump", "2", "--observable", "a1b1+", "--lags", "16",
                                         "--total-time", "80", "--transient", "2", "--trajectories", "3"};
  const auto a = scratch("repro_a"), b = scratch("repro_b"), c = scratch("repro_c");
  auto args = base;
  args.insert(args.end(), {"--seed", "5", "--output", a.string()});
  REQUIRE(cli(args).code == 0);
  args = base;
  args.insert(args.end(), {"--seed", "5", "--threads", "1", "--output", b.string()});
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(a / "a1b1_plus.csv") == slurp(b / "a1b1_plus.csv"));
  CHECK(slurp(a / "a1b1_plus.csv").starts_with("omega,vbar,stat_err\n"));
  const auto meta = nlohmann::json::parse(slurp(a / "a1b1_plus.json"));
  CHECK(meta["seed"] == 5);

  // seed from the environment when no flag is given
  setenv("QDIMER_SEED", "5", 1);
  args = base;
  args.insert(args.end(), {"--output", c.string()});
  REQUIRE(cli(args).code == 0);
  unsetenv("QDIMER_SEED");
  CHECK(slurp(a / "a1b1_plus.csv") == slurp(c / "a1b1_plus.csv"));

  args = base;
  args.insert(args.end(), {"--seed", "6", "--output", c.string()});
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(a / "a1b1_plus.csv") != slurp(c / "a1b1_plus.csv"));
}

TEST_CASE("verdicts from stored numbers") {
  SpectrumSeries<double> an, sim;
  an.omega = Eigen::VectorXd::LinSpaced(21, -10, 10);
  an.values = 1 - 0.5 * (-an.omega.array().square() / 4).exp();
  sim = an;
  sim.statErr = Eigen::VectorXd::Constant(21, 0.01);
  sim.values.array() += 0.02;
  auto r = compute_verdict(an, sim, 3, 10);
  CHECK(r.verdict == "agree");
  CHECK(r.pointsCompared == 11);
  CHECK(r.analyticArgmin == 0.0);
  CHECK(r.maxDeviationSigma == doctest::Approx(2.0));

  sim.values(15) += 0.2;
  CHECK(compute_verdict(an, sim, 3, 10).verdict == "disagree");
  CHECK(compute_verdict(an, sim, 3, 10).pointsOutside == 1);
  CHECK(compute_verdict(an, sim, 3, 4).verdict == "agree");

  sim = an;
  sim.statErr = Eigen::VectorXd::Constant(21, 1.0);
  sim.values(12) -= 0.6;
  r = compute_verdict(an, sim, 3, 10);
  CHECK(r.argminBinOffset == 2);
  CHECK(r.verdict == "disagree");

  sim.statErr.resize(0);
  CHECK(compute_verdict(an, sim, 3, 10).verdict == "undetermined");
  sim.omega(0) += 1;
  CHECK_THROWS_AS(compute_verdict(an, sim, 3, 10), InvalidArgument);
}

TEST_CASE("compare writes a report whose verdict the two CSV files reproduce") {
  const auto dir = scratch("compare");
  const auto r = cli({"compare", "--gamma", "1", "--delta", "0", "--j1", "4", "--j2", "1", "--pump-fraction", "0.5",
                      "--observable", "a2b2+,a1b1-", "--lags", "32", "--total-time", "640", "--transient", "5",
                      "--trajectories", "4", "--seed", "3", "--band", "10", "--output", dir.string()});
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  REQUIRE(report["observables"].size() == 2);
  CHECK(report["metadata"]["seed"] == 3);
  for (const auto& o : report["observables"]) {
    const std::string name = o["observable"];
    CAPTURE(name);
    const auto again = cli({"compare", "--analytic-csv", (dir / ("analytic_" + name + ".csv")).string(), "--sim-csv",
                            (dir / ("sim_" + name + ".csv")).string(), "--band", "10"});
    CHECK(again.code == 0);
    CHECK(again.out.find("verdict: " + o["verdict"].get<std::string>()) != std::string::npos);
    CHECK(again.out.find(name + ":") != std::string::npos);
  }
  CHECK(cli({"compare", "--analytic-csv", (dir / "report.json").string()}).code == 2);
}

TEST_CASE("I/O failures exit with code 1") {
  const auto dir = scratch("ioerr");
  std::ofstream(dir / "blocker") << "x";
  const auto r = cli({"spectrum-analytic", "--gamma", "1", "--delta", "0", "--j1", "1", "--j2", "1", "--pump", "1",
                      "--output", (dir / "blocker" / "sub").string()});
  CHECK(r.code == 1);
  CHECK(r.err.starts_with("error:"));
}
