#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qdimer/errors.hpp"

namespace qdimer {

template <typename Real>
struct DimerParams {
  Real gamma = 1;
  Real delta1 = 0;
  Real delta2 = 0;
  Real j1 = 0;
  Real j2 = 0;
  Real pump = 0;
  Real ns = 1e8;
};

template <typename Real>
void validate(const DimerParams<Real>& p) {
  using std::isfinite;
  if (!isfinite(p.gamma) || !(p.gamma > 0)) throw InvalidArgument("gamma must be positive");
  if (!isfinite(p.ns) || !(p.ns > 0)) throw InvalidArgument("ns must be positive");
  if (!isfinite(p.pump) || p.pump < 0) throw InvalidArgument("pump must be non-negative");
  if (!isfinite(p.delta1) || !isfinite(p.delta2) || !isfinite(p.j1) || !isfinite(p.j2))
    throw InvalidArgument("detunings and couplings must be finite");
}

template <typename Real>
struct EffectiveDetunings {
  Real d1;
  Real d2;
};

template <typename Real>
EffectiveDetunings<Real> effective_detunings(const DimerParams<Real>& p) {
  return {p.delta1 - p.j1, p.delta2 - p.j2};
}

template <typename Real>
Real reduce_phase(Real phi) {
  const Real pi = std::numbers::pi_v<Real>;
  phi = std::remainder(phi, 2 * pi);
  if (phi <= -pi) phi += 2 * pi;
  return phi;
}

// E^2 as a function of the FH intensity on the symmetric branch
template <typename Real>
Real pump_for_intensity(const DimerParams<Real>& p, Real i1) {
  auto [d1, d2] = effective_detunings(p);
  const Real den = d2 * d2 + p.gamma * p.gamma;
  return i1 * i1 * (i1 / 4 + (p.gamma - d1 * d2)) / den + i1 * (d1 * d1 + 1);
}

template <typename Real>
Real sh_steady_intensity(const DimerParams<Real>& p, Real i1) {
  const Real d2 = p.delta2 - p.j2;
  return i1 * i1 / (4 * (d2 * d2 + p.gamma * p.gamma));
}

template <typename Real>
std::pair<Real, Real> steady_phases(const DimerParams<Real>& p, Real i1) {
  using C = std::complex<Real>;
  auto [d1, d2] = effective_detunings(p);
  const C z = C(1, -d1) + i1 / (Real(2) * C(p.gamma, -d2));
  const Real phi1 = reduce_phase(-std::arg(z));
  const Real phi2 = reduce_phase(-std::arg(C(-p.gamma, d2)) + 2 * phi1);
  return {phi1, phi2};
}

template <typename Real>
struct SymmetricSteadyState {
  Real i1 = 0;
  Real i2 = 0;
  Real phi1 = 0;
  Real phi2 = 0;
  std::complex<Real> a1;
  std::complex<Real> a2;
};

template <typename Real>
SymmetricSteadyState<Real> make_symmetric_state(const DimerParams<Real>& p, Real i1) {
  SymmetricSteadyState<Real> s;
  s.i1 = i1;
  s.i2 = sh_steady_intensity(p, i1);
  std::tie(s.phi1, s.phi2) = steady_phases(p, i1);
  s.a1 = std::polar(std::sqrt(s.i1), s.phi1);
  s.a2 = std::polar(std::sqrt(s.i2), s.phi2);
  return s;
}

template <typename Real>
std::vector<SymmetricSteadyState<Real>> solve_symmetric_steady_states(const DimerParams<Real>& p) {
  validate(p);
  if (p.pump == 0) return {make_symmetric_state(p, Real(0))};

  auto [d1, d2] = effective_detunings(p);
  const Real den = d2 * d2 + p.gamma * p.gamma;
  // monic cubic I^3 + b I^2 + c I + e = 0
  const Real b = 4 * (p.gamma - d1 * d2);
  const Real c = 4 * den * (d1 * d1 + 1);
  const Real e = -4 * den * p.pump * p.pump;

  Eigen::Matrix<Real, 3, 3> companion;
  companion << -b, -c, -e,
                1,  0,  0,
                0,  1,  0;
  Eigen::EigenSolver<Eigen::Matrix<Real, 3, 3>> es(companion, false);
  if (es.info() != Eigen::Success) throw NumericalError("companion eigen-solve failed");

  std::vector<Real> roots;
  for (int k = 0; k < 3; ++k) {
    const std::complex<Real> r = es.eigenvalues()(k);
    if (std::abs(r.imag()) >= Real(1e-9) * (1 + std::abs(r.real()))) continue;
    if (r.real() < Real(-1e-12)) continue;
    Real x = std::max(r.real(), Real(0));
    for (int it = 0; it < 3; ++it) {
      const Real f = ((x + b) * x + c) * x + e;
      const Real df = (3 * x + 2 * b) * x + c;
      if (df == 0) break;
      const Real nx = x - f / df;
      if (!(nx >= 0) || std::abs(nx - x) > Real(1e-6) * (1 + x)) break;
      x = nx;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());

  std::vector<SymmetricSteadyState<Real>> out;
  for (Real r : roots) out.push_back(make_symmetric_state(p, r));
  return out;
}

template <typename Real>
bool bistability_predicate(const EffectiveDetunings<Real>& eff, Real gamma) {
  const Real s3 = std::sqrt(Real(3));
  const Real ad1 = std::abs(eff.d1);
  return eff.d1 * eff.d2 > 0 && std::abs(eff.d2) * (ad1 - s3) / (s3 * ad1 + 1) > gamma;
}

// turning points of E^2(I1): zeros of dE^2/dI1, present only in the bistable regime
template <typename Real>
std::optional<std::pair<Real, Real>> fold_intensities(const DimerParams<Real>& p) {
  auto [d1, d2] = effective_detunings(p);
  const Real den = d2 * d2 + p.gamma * p.gamma;
  const Real h = d1 * d2 - p.gamma;
  const Real disc = 16 * h * h - 12 * den * (d1 * d1 + 1);
  if (h <= 0 || disc <= 0) return std::nullopt;
  const Real sq = std::sqrt(disc);
  return std::make_pair((4 * h - sq) / 3, (4 * h + sq) / 3);
}

enum class Branch { Lower, Middle, Upper };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::Lower: return "lower";
    case Branch::Middle: return "middle";
    case Branch::Upper: return "upper";
  }
  return "?";
}

template <typename Real>
SymmetricSteadyState<Real> steady_state_on_branch(const DimerParams<Real>& p, Branch branch) {
  auto states = solve_symmetric_steady_states(p);
  auto folds = fold_intensities(p);
  if (!folds) return states.front();

  auto [ia, ib] = *folds;
  auto inBranch = [&](Real i) {
    switch (branch) {
      case Branch::Lower: return i <= ia;
      case Branch::Middle: return i > ia && i < ib;
      case Branch::Upper: return i >= ib;
    }
    return false;
  };
  for (const auto& s : states)
    if (inBranch(s.i1)) return s;

  // lower branch ends at the max of E(I) (I = ia), upper starts at its min (I = ib)
  const Real fold = std::sqrt(pump_for_intensity(p, branch == Branch::Upper ? ib : ia));
  std::ostringstream msg;
  msg << to_string(branch) << " branch absent at E=" << p.pump << " (fold at E=" << fold << ")";
  throw BranchAbsent(msg.str(), static_cast<double>(fold));
}

template <typename Real>
struct FieldAmplitudes {
  std::complex<Real> a1, a2, b1, b2;
};

// deterministic part of the Wigner Langevin equations
template <typename Real>
FieldAmplitudes<Real> drift(const DimerParams<Real>& p, const FieldAmplitudes<Real>& f) {
  using C = std::complex<Real>;
  const C i(0, 1);
  FieldAmplitudes<Real> r;
  r.a1 = C(-1, p.delta1) * f.a1 + std::conj(f.a1) * f.a2 - i * p.j1 * f.b1 + p.pump;
  r.a2 = C(-p.gamma, p.delta2) * f.a2 - f.a1 * f.a1 / Real(2) - i * p.j2 * f.b2;
  r.b1 = C(-1, p.delta1) * f.b1 + std::conj(f.b1) * f.b2 - i * p.j1 * f.a1 + p.pump;
  r.b2 = C(-p.gamma, p.delta2) * f.b2 - f.b1 * f.b1 / Real(2) - i * p.j2 * f.a2;
  return r;
}

template <typename Real>
Real norm(const FieldAmplitudes<Real>& f) {
  return std::sqrt(std::norm(f.a1) + std::norm(f.a2) + std::norm(f.b1) + std::norm(f.b2));
}

template <typename Real>
FieldAmplitudes<Real> symmetric_fields(const SymmetricSteadyState<Real>& s) {
  return {s.a1, s.a2, s.a1, s.a2};
}

}  // namespace qdimer
