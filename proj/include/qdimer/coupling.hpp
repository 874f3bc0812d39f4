#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "qdimer/errors.hpp"

namespace qdimer {

template <typename Real>
struct NormalizationContext {
  Real kappa = 1;
  Real gamma1 = 1;
  Real cavityLength = 1;
  Real transmission1 = 1;
  Real roundTripTime = 1;
};

template <typename Real>
void validate(const NormalizationContext<Real>& c) {
  if (!(c.kappa > 0 && c.gamma1 > 0 && c.cavityLength > 0 && c.transmission1 > 0 && c.roundTripTime > 0))
    throw InvalidArgument("normalization context entries must be positive");
  if (c.transmission1 > 1) throw InvalidArgument("transmission1 must not exceed 1");
}

template <typename Real>
struct ModeProfilePair {
  using Array = Eigen::Array<Real, Eigen::Dynamic, 1>;
  Array grid;
  Array uA;
  Array uB;
  Real k1 = 1;
  Real beta = 1;
  Real indexContrast = 1;
  Real windowLo = 0;
  Real windowHi = 0;
};

// trapezoid of f over [lo, hi], linear interpolation where the window cuts a grid cell
template <typename Real>
Real trapezoid_window(const Eigen::Array<Real, Eigen::Dynamic, 1>& x,
                      const Eigen::Array<Real, Eigen::Dynamic, 1>& f, Real lo, Real hi) {
  Real sum = 0;
  for (Eigen::Index k = 0; k + 1 < x.size(); ++k) {
    const Real x0 = x(k), x1 = x(k + 1);
    const Real a = std::max(x0, lo), b = std::min(x1, hi);
    if (b <= a) continue;
    auto at = [&](Real t) { return f(k) + (f(k + 1) - f(k)) * (t - x0) / (x1 - x0); };
    sum += (b - a) * (at(a) + at(b)) / 2;
  }
  return sum;
}

template <typename Real>
void validate(const ModeProfilePair<Real>& m, Real normTol = Real(1e-3)) {
  const auto n = m.grid.size();
  if (n < 2 || m.uA.size() != n || m.uB.size() != n) throw InvalidArgument("profiles must share a grid of >= 2 points");
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (!(m.grid(k + 1) > m.grid(k))) throw InvalidArgument("profile grid must be strictly ascending");
  if (!(m.windowHi > m.windowLo)) throw InvalidArgument("overlap window must have positive length");
  const Real span = m.grid(n - 1) - m.grid(0);
  const Real eps = Real(1e-12) * std::max(Real(1), span);
  if (m.grid(0) > m.windowLo + eps || m.grid(n - 1) < m.windowHi - eps)
    throw InvalidArgument("profile grid does not cover the overlap window");
  const Real lo = m.grid(0), hi = m.grid(n - 1);
  const Real na = trapezoid_window<Real>(m.grid, m.uA * m.uA, lo, hi);
  const Real nb = trapezoid_window<Real>(m.grid, m.uB * m.uB, lo, hi);
  if (std::abs(na - 1) > normTol || std::abs(nb - 1) > normTol)
    throw InvalidArgument("mode profiles are not normalized");
}

// propagation coupling constant (1/length)
template <typename Real>
Real coupling_overlap_integral(const ModeProfilePair<Real>& m) {
  validate(m);
  const Real overlap = trapezoid_window<Real>(m.grid, m.uA * m.uB, m.windowLo, m.windowHi);
  return m.indexContrast * m.k1 * m.k1 / m.beta * overlap;
}

template <typename Real>
Real normalized_coupling(Real jprop, const NormalizationContext<Real>& ctx) {
  validate(ctx);
  return jprop * 2 * ctx.cavityLength / ctx.transmission1;
}

}  // namespace qdimer
