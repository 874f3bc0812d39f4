#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "qdimer/coupling.hpp"
#include "qdimer/model.hpp"

using namespace qdimer;
using P = DimerParams<double>;
using std::numbers::pi;

namespace {

P params(double gamma, double delta, double j1, double j2, double pump = 0) {
  P p;
  p.gamma = gamma;
  p.delta1 = p.delta2 = delta;
  p.j1 = j1;
  p.j2 = j2;
  p.pump = pump;
  return p;
}

double residual(const P& p, const SymmetricSteadyState<double>& s) { return norm(drift(p, symmetric_fields(s))); }

// E^2(I) written out independently of the library
// E = (1 - i d1) A1 - A1* A2 with A2 = A1^2 / (2 (-g + i d2))
double e2_oracle(double g, double d1, double d2, double intensity) {
  const std::complex<double> sh = 1.0 / (2.0 * std::complex<double>(-g, d2));
  return intensity * std::norm(std::complex<double>(1, -d1) - intensity * sh);
}

// count solutions of E^2(I) = target by sign changes on a fine grid
int brute_root_count(double g, double d1, double d2, double e2) {
  int count = 0;
  const double top = 4 * std::cbrt(4 * (d2 * d2 + g * g) * e2) + 10;
  const int n = 400000;
  double prev = -e2;
  for (int k = 1; k <= n; ++k) {
    const double i = top * k / n;
    const double f = e2_oracle(g, d1, d2, i) - e2;
    if ((f > 0) != (prev > 0)) ++count;
    prev = f;
  }
  return count;
}

}  // namespace

TEST_CASE("effective detunings subtract the couplings") {
  auto e = effective_detunings(params(1, 0, 3, 1));
  CHECK(e.d1 == -3.0);
  CHECK(e.d2 == -1.0);
  P p = params(1, 1.1, 20, 1);
  e = effective_detunings(p);
  CHECK(e.d1 == doctest::Approx(-18.9));
  CHECK(e.d2 == doctest::Approx(0.1));
  e = effective_detunings(params(1, 2.5, 2.5, 2.5));
  CHECK(e.d1 == 0.0);
  CHECK(e.d2 == 0.0);
}

TEST_CASE("pump for intensity") {
  CHECK(pump_for_intensity(params(0.3, 1, 2, 1), 0.0) == 0.0);
  P p = params(1, 0, 0, 0, 2 * std::sqrt(2.0));
  CHECK(pump_for_intensity(p, 2.0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(residual(p, make_symmetric_state(p, 2.0)) < 1e-14);

  P f = params(0.1, 0, 3, 1, 3.275);
  const auto states = solve_symmetric_steady_states(f);
  REQUIRE(states.size() == 3);
  for (const auto& s : states) CHECK(pump_for_intensity(f, s.i1) == doctest::Approx(3.275 * 3.275).epsilon(1e-12));
}

TEST_CASE("pump for intensity agrees with the field-equation oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4, 4), g(0.05, 5), in(0, 30);
  for (int t = 0; t < 200; ++t) {
    P p = params(g(rng), 0, 0, 0);
    p.delta1 = u(rng);
    p.delta2 = u(rng);
    const double i = in(rng);
    auto [d1, d2] = effective_detunings(p);
    CHECK(pump_for_intensity(p, i) == doctest::Approx(e2_oracle(p.gamma, d1, d2, i)).epsilon(1e-12));
  }
}

TEST_CASE("second-harmonic intensity") {
  CHECK(sh_steady_intensity(params(1, 0, 0, 0), 0.0) == 0.0);
  CHECK(sh_steady_intensity(params(1, 0, 0, 0), 2.0) == doctest::Approx(1.0));
  CHECK(sh_steady_intensity(params(0.1, 0, 0, 1), 4.0) == doctest::Approx(16 / 4.04).epsilon(1e-14));
  CHECK(sh_steady_intensity(params(0.1, 0, 0, 1), 4.0) == doctest::Approx(3.9604).epsilon(1e-4));
}

TEST_CASE("steady phases") {
  P p = params(1, 0, 0, 0);
  auto [phi1, phi2] = steady_phases(p, 2.0);
  CHECK(phi1 == doctest::Approx(0.0));
  CHECK(phi2 == doctest::Approx(pi));
  CHECK(std::abs(std::polar(1.0, phi2) + 1.0) < 1e-15);
  std::tie(phi1, phi2) = steady_phases(p, 0.0);
  CHECK(phi1 == doctest::Approx(0.0));
  CHECK(std::abs(std::polar(1.0, phi2) + 1.0) < 1e-15);

  // A2 = -1 zeroes the SH drift at I1 = 2
  p.pump = 2 * std::sqrt(2.0);
  const auto s = make_symmetric_state(p, 2.0);
  CHECK(std::abs(drift(p, symmetric_fields(s)).a2) < 1e-15);
}

TEST_CASE("phase reduction lands in (-pi, pi]") {
  CHECK(reduce_phase(-pi) == doctest::Approx(pi));
  CHECK(reduce_phase(pi) == doctest::Approx(pi));
  CHECK(reduce_phase(3 * pi) == doctest::Approx(pi));
  CHECK(reduce_phase(-3.5 * pi) == doctest::Approx(0.5 * pi));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-6, 6), g(0.05, 10), e(0, 30);
  for (int t = 0; t < 500; ++t) {
    P p = params(g(rng), u(rng), std::abs(u(rng)), std::abs(u(rng)), e(rng));
    for (const auto& s : solve_symmetric_steady_states(p)) {
      CHECK(s.phi1 > -pi);
      CHECK(s.phi1 <= pi);
      CHECK(s.phi2 > -pi);
      CHECK(s.phi2 <= pi);
    }
  }
}

TEST_CASE("solver examples") {
  auto zero = solve_symmetric_steady_states(params(1, 0, 0, 0, 0));
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].i1 == 0.0);
  CHECK(std::abs(zero[0].a1) == 0.0);
  CHECK(std::abs(zero[0].a2) == 0.0);

  auto one = solve_symmetric_steady_states(params(1, 0, 0, 0, 2 * std::sqrt(2.0)));
  REQUIRE(one.size() == 1);
  CHECK(one[0].i1 == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(one[0].i2 == doctest::Approx(1.0).epsilon(1e-13));

  auto three = solve_symmetric_steady_states(params(0.1, 0, 3, 1, 3.275));
  CHECK(three.size() == 3);
  CHECK(three[0].i1 < three[1].i1);
  CHECK(three[1].i1 < three[2].i1);

  CHECK_THROWS_AS(solve_symmetric_steady_states(params(1, 0, 0, 0, -1)), InvalidArgument);
}

TEST_CASE("steady states have zero drift") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5), g(0.05, 10), e(0, 40);
  for (int t = 0; t < 1000; ++t) {
    P p = params(g(rng), 0, std::abs(u(rng)), std::abs(u(rng)), e(rng));
    p.delta1 = u(rng);
    p.delta2 = u(rng);
    for (const auto& s : solve_symmetric_steady_states(p)) {
      CHECK(residual(p, s) < 1e-10 * std::max(1.0, p.pump));
      CHECK(std::norm(s.a1) == doctest::Approx(s.i1).epsilon(1e-13));
      CHECK(std::norm(s.a2) == doctest::Approx(s.i2).epsilon(1e-13));
    }
  }
}

TEST_CASE("root count matches a brute-force scan of E^2(I)") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6, 6), g(0.05, 2), e(0.1, 12);
  int checked = 0;
  for (int t = 0; t < 150; ++t) {
    P p = params(g(rng), 0, 0, 0, e(rng));
    p.delta1 = u(rng);
    p.delta2 = u(rng);
    auto [d1, d2] = effective_detunings(p);
    const int brute = brute_root_count(p.gamma, d1, d2, p.pump * p.pump);
    const int solved = static_cast<int>(solve_symmetric_steady_states(p).size());
    // skip pumps sitting on a fold, where the grid cannot resolve a double root
    if (auto f = fold_intensities(p)) {
      const double ea = std::sqrt(pump_for_intensity(p, f->first));
      const double eb = std::sqrt(pump_for_intensity(p, f->second));
      if (std::abs(p.pump - ea) < 1e-3 || std::abs(p.pump - eb) < 1e-3) continue;
    }
    CHECK(brute == solved);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("bistability predicate") {
  const EffectiveDetunings<double> fig{-3, -1};
  CHECK(bistability_predicate(fig, 0.1));
  const double s3 = std::sqrt(3.0);
  CHECK(1 * (3 - s3) / (s3 * 3 + 1) == doctest::Approx(0.2046).epsilon(1e-3));
  CHECK_FALSE(bistability_predicate(fig, 0.25));
  CHECK_FALSE(bistability_predicate(EffectiveDetunings<double>{1.7, 100}, 1e-6));
  CHECK_FALSE(bistability_predicate(EffectiveDetunings<double>{-s3, -100}, 1e-6));
  CHECK_FALSE(bistability_predicate(EffectiveDetunings<double>{-3, 1}, 0.01));
  CHECK_FALSE(bistability_predicate(EffectiveDetunings<double>{3, -1}, 0.01));
}

TEST_CASE("bistability predicate matches a non-monotone E^2(I) curve") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-8, 8), g(0.02, 1);
  int checked = 0;
  for (int t = 0; t < 400; ++t) {
    const double gamma = g(rng), d1 = u(rng), d2 = u(rng);
    // brute-force slope sign of E^2 on a grid
    bool decreasing = false;
    double prev = 0;
    for (int k = 1; k <= 20000; ++k) {
      const double i = 200.0 * k / 20000;
      const double v = e2_oracle(gamma, d1, d2, i);
      if (v < prev) decreasing = true;
      prev = v;
    }
    const double s3 = std::sqrt(3.0);
    const double margin = std::abs(std::abs(d2) * (std::abs(d1) - s3) / (s3 * std::abs(d1) + 1) - gamma);
    if (margin < 1e-2) continue;
    CHECK(bistability_predicate(EffectiveDetunings<double>{d1, d2}, gamma) == decreasing);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("resonant branch is monotone") {
  for (double g : {0.1, 1.0, 10.0})
    for (int k = 0; k <= 200; ++k) {
      P p = params(g, 1.5, 1.5, 1.5, 0.25 * k);
      CHECK(solve_symmetric_steady_states(p).size() == 1);
    }
}

TEST_CASE("branch selection") {
  P p = params(0.1, 0, 3, 1, 3.275);
  const auto all = solve_symmetric_steady_states(p);
  CHECK(steady_state_on_branch(p, Branch::Lower).i1 == doctest::Approx(all[0].i1));
  CHECK(steady_state_on_branch(p, Branch::Middle).i1 == doctest::Approx(all[1].i1));
  CHECK(steady_state_on_branch(p, Branch::Upper).i1 == doctest::Approx(all[2].i1));

  p.pump = 1.0;
  CHECK_NOTHROW(steady_state_on_branch(p, Branch::Lower));
  try {
    steady_state_on_branch(p, Branch::Upper);
    FAIL("upper branch should be absent at low pump");
  } catch (const BranchAbsent& e) {
    auto f = fold_intensities(p);
    REQUIRE(f);
    CHECK(e.foldPump == doctest::Approx(std::sqrt(pump_for_intensity(p, f->second))));
    CHECK(e.foldPump > 1.0);
  }

  // monotone curve: every label maps to the single root
  P m = params(1, 0, 0, 0, 2);
  CHECK(steady_state_on_branch(m, Branch::Upper).i1 == steady_state_on_branch(m, Branch::Lower).i1);
}

TEST_CASE("three roots exist exactly between the two fold pumps") {
  P p = params(0.1, 0, 3, 1);
  auto f = fold_intensities(p);
  REQUIRE(f);
  const double eUp = std::sqrt(pump_for_intensity(p, f->first));
  const double eDown = std::sqrt(pump_for_intensity(p, f->second));
  CHECK(eDown < eUp);
  for (int k = 0; k <= 400; ++k) {
    p.pump = 0.02 * k;
    const auto n = solve_symmetric_steady_states(p).size();
    if (p.pump < eDown - 1e-6 || p.pump > eUp + 1e-6) CHECK(n == 1);
    else if (p.pump > eDown + 1e-6 && p.pump < eUp - 1e-6) CHECK(n == 3);
  }
}

namespace {

ModeProfilePair<double> exp_profiles(double a, double ell, double lo, double hi, int n) {
  ModeProfilePair<double> m;
  m.grid = Eigen::ArrayXd::LinSpaced(n, lo, hi);
  m.uA = (-(m.grid + a).abs() / ell).exp() / std::sqrt(ell);
  m.uB = (-(m.grid - a).abs() / ell).exp() / std::sqrt(ell);
  m.k1 = 1;
  m.beta = 1;
  m.indexContrast = 1;
  m.windowLo = lo;
  m.windowHi = hi;
  return m;
}

}  // namespace

TEST_CASE("overlap integral") {
  // exponential tails: closed form e^{-2a/l} (2a + l) / l
  const double a = 1.5, ell = 0.7;
  auto m = exp_profiles(a, ell, -30, 30, 600001);
  const double exact = std::exp(-2 * a / ell) * (2 * a + ell) / ell;
  CHECK(coupling_overlap_integral(m) == doctest::Approx(exact).epsilon(1e-6));

  m.k1 = 2;
  m.beta = 8;
  m.indexContrast = 0.3;
  CHECK(coupling_overlap_integral(m) == doctest::Approx(0.3 * 4 / 8 * exact).epsilon(1e-6));

  // identical normalized profiles over the full line give k1^2 / beta
  auto same = exp_profiles(0, ell, -30, 30, 600001);
  same.uB = same.uA;
  same.k1 = 3;
  same.beta = 2;
  CHECK(coupling_overlap_integral(same) == doctest::Approx(4.5).epsilon(1e-6));

  // disjoint support
  ModeProfilePair<double> d;
  d.grid = Eigen::ArrayXd::LinSpaced(4001, -4, 4);
  d.uA = (d.grid < 0).select(Eigen::ArrayXd::Constant(4001, 0.5), 0.0);
  d.uB = (d.grid > 0).select(Eigen::ArrayXd::Constant(4001, 0.5), 0.0);
  d.uA(2000) = 0;
  d.windowLo = -4;
  d.windowHi = 4;
  CHECK_NOTHROW(validate(d, 1e-2));
  d.windowLo = 0.5;
  CHECK(coupling_overlap_integral(ModeProfilePair<double>(d)) == doctest::Approx(0.0));

  auto narrow = exp_profiles(a, ell, -30, 30, 6001);
  narrow.windowHi = 31;
  CHECK_THROWS_AS(coupling_overlap_integral(narrow), InvalidArgument);
}

TEST_CASE("windowed overlap matches the analytic partial integral") {
  const double a = 1.0, ell = 1.0;
  auto m = exp_profiles(a, ell, -30, 30, 600001);
  m.windowLo = -0.25;
  m.windowHi = 0.3;
  // inside |x| < a the product is e^{-2a/l} / l
  CHECK(coupling_overlap_integral(m) == doctest::Approx(0.55 * std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("normalized coupling") {
  NormalizationContext<double> c;
  c.cavityLength = 0.05;
  c.transmission1 = 0.01;
  CHECK(normalized_coupling(0.0, c) == 0.0);
  CHECK(normalized_coupling(1.0, c) == doctest::Approx(10.0));
  c.cavityLength = 0.5;
  c.transmission1 = 1;
  CHECK(normalized_coupling(1.0, c) == doctest::Approx(1.0));
  c.transmission1 = 1.5;
  CHECK_THROWS_AS(normalized_coupling(1.0, c), InvalidArgument);
}
