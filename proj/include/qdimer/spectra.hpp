#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdimer/errors.hpp"
#include "qdimer/model.hpp"
#include "qdimer/stability.hpp"

namespace qdimer {

inline constexpr double kMaxCondition = 1e12;

// S(w) = (-iw - A)^-1 D (iw - A^T)^-1 for any square complex A
template <typename DerivedA, typename DerivedD>
Eigen::Matrix<typename DerivedA::Scalar, DerivedA::RowsAtCompileTime, DerivedA::ColsAtCompileTime>
spectral_matrix(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedD>& D,
                typename Eigen::NumTraits<typename DerivedA::Scalar>::Real omega) {
  using Scalar = typename DerivedA::Scalar;
  using Plain = Eigen::Matrix<Scalar, DerivedA::RowsAtCompileTime, DerivedA::ColsAtCompileTime>;
  const Scalar iw(0, omega);
  const Plain id = Plain::Identity(A.rows(), A.cols());
  const Plain left = -iw * id - A;
  const Plain right = iw * id - A.transpose();
  Eigen::PartialPivLU<Plain> luL(left), luR(right);
  if (!(luL.rcond() * kMaxCondition >= 1) || !(luR.rcond() * kMaxCondition >= 1)) {
    std::ostringstream msg;
    msg << "(-i w - A) is singular at w=" << omega;
    throw SingularFrequency(msg.str(), static_cast<double>(omega));
  }
  return luL.solve(D * luR.inverse());
}

template <typename Real>
struct SpectralMatrix {
  Real omega = 0;
  Matrix8<Real> entries;
};

template <typename Real>
SpectralMatrix<Real> spectral_matrix(const LinearizedSystem<Real>& sys, Real omega) {
  return {omega, spectral_matrix(sys.driftA, sys.diffusionD, omega)};
}

enum class Mode { FH, SH };
enum class Observable { A1A2, A1B2, A1B1, A2B2, A1, A2 };
enum class Sign { Plus, Minus };

inline bool is_monomer(Observable o) { return o == Observable::A1 || o == Observable::A2; }

inline const char* to_string(Observable o) {
  switch (o) {
    case Observable::A1A2: return "a1a2";
    case Observable::A1B2: return "a1b2";
    case Observable::A1B1: return "a1b1";
    case Observable::A2B2: return "a2b2";
    case Observable::A1: return "a1";
    case Observable::A2: return "a2";
  }
  return "?";
}

inline const char* to_string(Sign s) { return s == Sign::Plus ? "plus" : "minus"; }

template <typename Real = double>
struct SpectrumSeries {
  using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  Observable observable = Observable::A1B1;
  std::optional<Sign> sign;
  Vector omega;
  Vector values;
  Vector statErr;
  Real shotNoise = 0;
  std::vector<std::string> warnings;

  std::string name() const {
    std::string n = to_string(observable);
    if (sign) n += std::string("_") + to_string(*sign);
    return n;
  }
};

template <typename Real>
Eigen::Matrix<Real, Eigen::Dynamic, 1> default_frequency_grid(int points = 512, Real omegaMax = 20) {
  return Eigen::Matrix<Real, Eigen::Dynamic, 1>::LinSpaced(points, -omegaMax, omegaMax);
}

template <typename Real>
Real discard_imag(std::complex<Real> z, Real scale, const char* what) {
  if (std::abs(z.imag()) > Real(1e-9) * std::max(Real(1), scale)) {
    std::ostringstream msg;
    msg << what << " has imaginary residue " << z.imag();
    throw NumericalError(msg.str());
  }
  return z.real();
}

// normally ordered single-mode spectrum from S(w), S(-w); offset 0 = guide A, 4 = guide B
template <typename Real>
Real normal_spectrum(const Matrix8<Real>& S, const Matrix8<Real>& Sm, Real intensity, Real phase, int idx) {
  const std::complex<Real> rot = std::polar(Real(1), -2 * phase);
  const std::complex<Real> v = intensity * (S(idx, idx + 1) + Sm(idx, idx + 1)) +
                               intensity * Real(2) * (S(idx, idx) * rot).real();
  return discard_imag(v, std::abs(v), "normal spectrum");
}

template <typename Real>
Real single_mode_normal_spectrum(const LinearizedSystem<Real>& sys, const SymmetricSteadyState<Real>& state, Mode mode,
                                 Real omega) {
  const auto S = spectral_matrix(sys.driftA, sys.diffusionD, omega);
  const auto Sm = spectral_matrix(sys.driftA, sys.diffusionD, -omega);
  return mode == Mode::FH ? normal_spectrum<Real>(S, Sm, state.i1, state.phi1, 0)
                          : normal_spectrum<Real>(S, Sm, state.i2, state.phi2, 2);
}

template <typename Real>
Real shot_noise_level(const SymmetricSteadyState<Real>& s, const DimerParams<Real>& p, Observable o) {
  switch (o) {
    case Observable::A1A2:
    case Observable::A1B2: return 2 / p.ns * (s.i1 + p.gamma * s.i2);
    case Observable::A1B1: return 2 / p.ns * (2 * s.i1);
    case Observable::A2B2: return 2 / p.ns * (2 * p.gamma * s.i2);
    case Observable::A1: return 2 / p.ns * s.i1;
    case Observable::A2: return 2 / p.ns * p.gamma * s.i2;
  }
  return 0;
}

template <typename Real>
Real dimer_value(const Matrix8<Real>& S, const Matrix8<Real>& Sm, const SymmetricSteadyState<Real>& st,
                 const DimerParams<Real>& p, Observable o, Sign sign) {
  using C = std::complex<Real>;
  const Real g = p.gamma;
  const Real pm = sign == Sign::Plus ? 1 : -1;
  const Real vA1 = normal_spectrum<Real>(S, Sm, st.i1, st.phi1, 0);
  const Real vA2 = normal_spectrum<Real>(S, Sm, st.i2, st.phi2, 2);
  const Real vB1 = normal_spectrum<Real>(S, Sm, st.i1, st.phi1, 4);
  const Real vB2 = normal_spectrum<Real>(S, Sm, st.i2, st.phi2, 6);
  const C a1c = std::conj(st.a1);

  switch (o) {
    case Observable::A1A2:
    case Observable::A1B2: {
      const bool cross = o == Observable::A1B2;
      const int n = cross ? 7 : 3, m = cross ? 6 : 2;
      const C x = a1c * st.a2 * (S(0, n) + Sm(0, n)) + a1c * std::conj(st.a2) * (S(0, m) + S(m, 0));
      return 1 + 2 / (st.i1 + g * st.i2) * (vA1 + g * g * (cross ? vB2 : vA2) + pm * 2 * g * x.real());
    }
    case Observable::A1B1: {
      const C x = S(0, 5) + Sm(0, 5) + std::polar(Real(1), -2 * st.phi1) * (S(0, 4) + S(4, 0));
      return 1 + (vA1 + vB1) / st.i1 + pm * 2 * x.real();
    }
    case Observable::A2B2: {
      const C x = S(2, 7) + Sm(2, 7) + std::polar(Real(1), -2 * st.phi2) * (S(2, 6) + S(6, 2));
      return 1 + g * (vA2 + vB2) / st.i2 + pm * 2 * g * x.real();
    }
    case Observable::A1: return 1 + 2 * vA1 / st.i1;
    case Observable::A2: return 1 + 2 * g * vA2 / st.i2;
  }
  return 0;
}

template <typename Real>
void require_normalizable(const SymmetricSteadyState<Real>& st, Observable o) {
  const bool needI1 = o != Observable::A2B2 && o != Observable::A2;
  const bool needI2 = o == Observable::A2B2 || o == Observable::A2;
  if ((needI1 && !(st.i1 > 0)) || (needI2 && !(st.i2 > 0)))
    throw InvalidArgument("shot-noise normalization undefined at zero intensity");
}

template <typename Real>
SpectrumSeries<Real> assemble_series(const LinearizedSystem<Real>& sys, const SymmetricSteadyState<Real>& st,
                                     const DimerParams<Real>& p, Observable o, std::optional<Sign> sign,
                                     const Eigen::Matrix<Real, Eigen::Dynamic, 1>& grid) {
  require_normalizable(st, o);
  SpectrumSeries<Real> out;
  out.observable = o;
  out.sign = sign;
  out.shotNoise = shot_noise_level(st, p, o);
  std::vector<Real> w, v;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    try {
      const auto S = spectral_matrix(sys.driftA, sys.diffusionD, grid(k));
      const auto Sm = spectral_matrix(sys.driftA, sys.diffusionD, Real(-grid(k)));
      v.push_back(dimer_value<Real>(S, Sm, st, p, o, sign.value_or(Sign::Plus)));
      w.push_back(grid(k));
    } catch (const SingularFrequency& e) {
      out.warnings.push_back(std::string("missing point: ") + e.what());
    }
  }
  out.omega = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>(w.data(), static_cast<Eigen::Index>(w.size()));
  out.values = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>>(v.data(), static_cast<Eigen::Index>(v.size()));
  return out;
}

template <typename Real>
SpectrumSeries<Real> dimer_spectrum(const LinearizedSystem<Real>& sys, const SymmetricSteadyState<Real>& st,
                                    const DimerParams<Real>& p, Observable o, Sign sign,
                                    const Eigen::Matrix<Real, Eigen::Dynamic, 1>& grid) {
  if (is_monomer(o)) throw InvalidArgument("dimer_spectrum needs a two-mode observable");
  return assemble_series(sys, st, p, o, std::optional<Sign>(sign), grid);
}

template <typename Real>
SpectrumSeries<Real> monomer_spectrum(const LinearizedSystem<Real>& sys, const SymmetricSteadyState<Real>& st,
                                      const DimerParams<Real>& p, Mode mode,
                                      const Eigen::Matrix<Real, Eigen::Dynamic, 1>& grid) {
  return assemble_series(sys, st, p, mode == Mode::FH ? Observable::A1 : Observable::A2, std::nullopt, grid);
}

template <typename Real>
SpectrumSeries<Real> analytic_spectrum(const SymmetricSteadyState<Real>& st, const DimerParams<Real>& p, Observable o,
                                       Sign sign, const Eigen::Matrix<Real, Eigen::Dynamic, 1>& grid) {
  const auto sys = build_linearized_system(st, p);
  if (is_monomer(o)) return monomer_spectrum(sys, st, p, o == Observable::A1 ? Mode::FH : Mode::SH, grid);
  return dimer_spectrum(sys, st, p, o, sign, grid);
}

}  // namespace qdimer
