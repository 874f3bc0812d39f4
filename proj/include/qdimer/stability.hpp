#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdimer/errors.hpp"
#include "qdimer/model.hpp"

namespace qdimer {

inline constexpr double kStabTol = 1e-9;
inline constexpr double kImagTol = 1e-7;

template <typename Real> using Matrix8 = Eigen::Matrix<std::complex<Real>, 8, 8>;
template <typename Real> using Matrix4 = Eigen::Matrix<std::complex<Real>, 4, 4>;
template <typename Real> using Vector8 = Eigen::Matrix<std::complex<Real>, 8, 1>;
template <typename Real> using Vector4 = Eigen::Matrix<std::complex<Real>, 4, 1>;

inline constexpr std::array<const char*, 8> kBasisLabels = {
    "dA1", "dA1+", "dA2", "dA2+", "dB1", "dB1+", "dB2", "dB2+"};

template <typename Real>
struct LinearizedSystem {
  Matrix8<Real> driftA;
  Matrix8<Real> diffusionD;
  Matrix8<Real> noiseB;
};

// Jacobian of the Langevin drift at arbitrary fields, basis (dA1, dA1+, dA2, dA2+, dB1, ...)
template <typename Real>
LinearizedSystem<Real> linearize_fields(const FieldAmplitudes<Real>& f, const DimerParams<Real>& p) {
  using C = std::complex<Real>;
  const C i(0, 1);
  LinearizedSystem<Real> s;
  auto& A = s.driftA;
  A.setZero();

  auto guide = [&](int o, C x1, C x2) {
    A(o + 0, o + 0) = C(-1, p.delta1);
    A(o + 0, o + 1) = x2;
    A(o + 0, o + 2) = std::conj(x1);
    A(o + 1, o + 0) = std::conj(x2);
    A(o + 1, o + 1) = C(-1, -p.delta1);
    A(o + 1, o + 3) = x1;
    A(o + 2, o + 0) = -x1;
    A(o + 2, o + 2) = C(-p.gamma, p.delta2);
    A(o + 3, o + 1) = -std::conj(x1);
    A(o + 3, o + 3) = C(-p.gamma, -p.delta2);
  };
  guide(0, f.a1, f.a2);
  guide(4, f.b1, f.b2);

  const std::array<C, 4> cross = {-i * p.j1, i * p.j1, -i * p.j2, i * p.j2};
  for (int k = 0; k < 4; ++k) {
    A(k, k + 4) = cross[k];
    A(k + 4, k) = cross[k];
  }

  s.diffusionD.setZero();
  s.diffusionD(0, 0) = f.a2;
  s.diffusionD(1, 1) = std::conj(f.a2);
  s.diffusionD(4, 4) = f.b2;
  s.diffusionD(5, 5) = std::conj(f.b2);
  s.noiseB.setZero();
  for (int k = 0; k < 8; ++k) s.noiseB(k, k) = std::sqrt(s.diffusionD(k, k));
  return s;
}

template <typename Real>
LinearizedSystem<Real> build_linearized_system(const SymmetricSteadyState<Real>& state, const DimerParams<Real>& p) {
  return linearize_fields(symmetric_fields(state), p);
}

template <typename Real>
Matrix4<Real> monomer_block(const LinearizedSystem<Real>& s) { return s.driftA.template topLeftCorner<4, 4>(); }

template <typename Real>
Matrix4<Real> cross_block(const LinearizedSystem<Real>& s) { return s.driftA.template topRightCorner<4, 4>(); }

template <typename Real>
Matrix4<Real> symmetric_block(const LinearizedSystem<Real>& s) { return monomer_block(s) + cross_block(s); }

template <typename Real>
Matrix4<Real> antisymmetric_block(const LinearizedSystem<Real>& s) { return monomer_block(s) - cross_block(s); }

template <typename Real, int N>
Eigen::Matrix<std::complex<Real>, N, 1> eigenvalues_of(const Eigen::Matrix<std::complex<Real>, N, N>& m) {
  Eigen::ComplexEigenSolver<Eigen::Matrix<std::complex<Real>, N, N>> es(m, false);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigen-solver did not converge for\n" << m;
    throw NumericalError(msg.str());
  }
  return es.eigenvalues();
}

template <typename Real>
struct EigenSpectrum {
  Vector8<Real> values;
  int dominant = 0;
  Vector8<Real> dominantVector;
  Vector4<Real> symmetricValues;
  Vector4<Real> antisymmetricValues;
};

template <typename Real>
int dominant_index(const Vector8<Real>& v, Real scale) {
  const Real tieTol = Real(1e-12) * std::max(Real(1), scale);
  int best = 0;
  for (int k = 1; k < 8; ++k) {
    const Real dr = v(k).real() - v(best).real();
    if (dr > tieTol || (std::abs(dr) <= tieTol && std::abs(v(k).imag()) > std::abs(v(best).imag()) + tieTol))
      best = k;
  }
  return best;
}

template <typename Real>
EigenSpectrum<Real> eigen_spectrum(const LinearizedSystem<Real>& sys) {
  if (!sys.driftA.allFinite()) throw InvalidArgument("drift matrix has non-finite entries");
  Eigen::ComplexEigenSolver<Matrix8<Real>> es(sys.driftA, true);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigen-solver did not converge for\n" << sys.driftA;
    throw NumericalError(msg.str());
  }
  EigenSpectrum<Real> out;
  out.values = es.eigenvalues();
  out.dominant = dominant_index<Real>(out.values, sys.driftA.norm());
  out.dominantVector = es.eigenvectors().col(out.dominant);
  out.symmetricValues = eigenvalues_of<Real, 4>(symmetric_block(sys));
  out.antisymmetricValues = eigenvalues_of<Real, 4>(antisymmetric_block(sys));
  return out;
}

enum class StabilityTag { StableSymmetric, StaticInstability, HopfInstability };
enum class StaticKind { None, BistableFold, AsymmetricTransition };

template <typename Real>
struct StabilityClass {
  StabilityTag tag = StabilityTag::StableSymmetric;
  StaticKind subtype = StaticKind::None;
  Real frequency = 0;
  std::complex<Real> criticalEigenvalue;
};

inline std::string to_string(StabilityTag tag, StaticKind kind) {
  switch (tag) {
    case StabilityTag::StableSymmetric: return "stable";
    case StabilityTag::HopfInstability: return "hopf";
    case StabilityTag::StaticInstability:
      return kind == StaticKind::BistableFold ? "fold" : "asymmetric";
  }
  return "?";
}

template <typename Real>
std::string to_string(const StabilityClass<Real>& c) { return to_string(c.tag, c.subtype); }

template <typename Real>
StabilityClass<Real> classify_state(const EigenSpectrum<Real>& spec, int multiplicity) {
  StabilityClass<Real> c;
  const auto lam = spec.values(spec.dominant);
  c.criticalEigenvalue = lam;
  if (lam.real() < -kStabTol) return c;
  if (std::abs(lam.imag()) > kImagTol) {
    c.tag = StabilityTag::HopfInstability;
    c.frequency = std::abs(lam.imag());
    return c;
  }
  c.tag = StabilityTag::StaticInstability;

  const auto& v = spec.dominantVector;
  const Real n = v.norm();
  const Real sym = (v.template head<4>() - v.template tail<4>()).norm();
  const Real anti = (v.template head<4>() + v.template tail<4>()).norm();
  const Real parityTol = Real(1e-6) * n;
  if (sym <= parityTol) {
    c.subtype = StaticKind::BistableFold;
    return c;
  }
  if (anti <= parityTol) {
    c.subtype = StaticKind::AsymmetricTransition;
    return c;
  }

  // degenerate eigenvalue: the eigenvector is a mix, ask which block owns it
  auto distance = [&](const Vector4<Real>& vals) {
    Real d = std::numeric_limits<Real>::infinity();
    for (int k = 0; k < 4; ++k) d = std::min(d, std::abs(vals(k) - lam));
    return d;
  };
  const Real blockTol = Real(1e-8) * std::max(Real(1), std::abs(lam) + 1);
  const bool inSym = distance(spec.symmetricValues) <= blockTol;
  const bool inAnti = distance(spec.antisymmetricValues) <= blockTol;
  if (inSym || multiplicity == 3) {
    c.subtype = StaticKind::BistableFold;
    return c;
  }
  if (inAnti) {
    c.subtype = StaticKind::AsymmetricTransition;
    return c;
  }
  std::ostringstream msg;
  msg << "critical eigenvector " << lam << " is neither symmetric nor antisymmetric";
  throw ClassificationError(msg.str());
}

template <typename Real>
StabilityClass<Real> classify(const SymmetricSteadyState<Real>& s, const DimerParams<Real>& p, int multiplicity) {
  return classify_state(eigen_spectrum(build_linearized_system(s, p)), multiplicity);
}

enum class ThresholdKind { Hopf, Static };

// true when an eigenvalue of the given kind has crossed into the right half-plane
template <typename Real>
bool unstable_of_kind(const Vector8<Real>& vals, ThresholdKind kind) {
  for (int k = 0; k < 8; ++k) {
    const bool oscillatory = std::abs(vals(k).imag()) > kImagTol;
    if (vals(k).real() >= 0 && oscillatory == (kind == ThresholdKind::Hopf)) return true;
  }
  return false;
}

template <typename Real>
bool unstable_at(DimerParams<Real> p, Real pump, ThresholdKind kind, Branch branch) {
  p.pump = pump;
  const auto s = steady_state_on_branch(p, branch);
  return unstable_of_kind<Real>(eigenvalues_of<Real, 8>(build_linearized_system(s, p).driftA), kind);
}

template <typename Real>
Real critical_pump_threshold(const DimerParams<Real>& params, ThresholdKind kind, Real lo, Real hi, Branch branch,
                             Real tol = Real(1e-6)) {
  if (!(hi > lo) || lo < 0) throw InvalidArgument("threshold bracket must satisfy 0 <= lo < hi");
  const bool ulo = unstable_at(params, lo, kind, branch);
  const bool uhi = unstable_at(params, hi, kind, branch);
  if (ulo == uhi) {
    std::ostringstream msg;
    msg << "no " << (kind == ThresholdKind::Hopf ? "hopf" : "static") << " crossing in [" << lo << ", " << hi << "]";
    throw NoSignChange(msg.str());
  }
  while (hi - lo >= tol) {
    const Real mid = (lo + hi) / 2;
    if (unstable_at(params, mid, kind, branch) == ulo) lo = mid;
    else hi = mid;
  }
  return (lo + hi) / 2;
}

// sweep E upward from eMin until the first instability of the requested kind, then bisect
template <typename Real>
Real locate_threshold(const DimerParams<Real>& params, ThresholdKind kind, Branch branch, Real eMin, Real eMax,
                      int steps = 2000) {
  Real prev = eMin;
  if (unstable_at(params, prev, kind, branch)) throw NoSignChange("already unstable at the start of the sweep");
  for (int k = 1; k <= steps; ++k) {
    const Real e = eMin + (eMax - eMin) * k / steps;
    if (unstable_at(params, e, kind, branch)) return critical_pump_threshold(params, kind, prev, e, branch);
    prev = e;
  }
  std::ostringstream msg;
  msg << "no " << (kind == ThresholdKind::Hopf ? "hopf" : "static") << " threshold below E=" << eMax;
  throw NoSignChange(msg.str());
}

enum class Axis { Delta, J1, J2, Pump, Gamma };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::Delta: return "delta";
    case Axis::J1: return "j1";
    case Axis::J2: return "j2";
    case Axis::Pump: return "pump";
    case Axis::Gamma: return "gamma";
  }
  return "?";
}

template <typename Real>
struct AxisRange {
  Axis axis = Axis::Delta;
  Real lo = 0;
  Real hi = 1;
  int count = 2;
  Real at(int k) const { return count == 1 ? lo : lo + (hi - lo) * k / (count - 1); }
};

template <typename Real>
struct ScanPlane {
  AxisRange<Real> x;
  AxisRange<Real> y;
  Real pumpMax = 100;
  int pumpSteps = 400;
};

enum class Region { Stable, Bistable, Hopf, Asymmetric, Error };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::Stable: return "stable";
    case Region::Bistable: return "bistable";
    case Region::Hopf: return "hopf";
    case Region::Asymmetric: return "asymmetric";
    case Region::Error: return "error";
  }
  return "?";
}

template <typename Real>
struct ScanCell {
  Real x = 0;
  Real y = 0;
  int rootCount = 0;
  Region region = Region::Stable;
  Real thresholdPump = std::numeric_limits<Real>::quiet_NaN();
  std::vector<StabilityClass<Real>> branches;
  std::optional<StabilityClass<Real>> upperBranch;
  std::string error;
};

template <typename Real>
void set_axis(DimerParams<Real>& p, Axis a, Real v) {
  switch (a) {
    case Axis::Delta: p.delta1 = p.delta2 = v; break;
    case Axis::J1: p.j1 = v; break;
    case Axis::J2: p.j2 = v; break;
    case Axis::Pump: p.pump = v; break;
    case Axis::Gamma: p.gamma = v; break;
  }
}

template <typename Real>
Region region_of(const StabilityClass<Real>& c) {
  switch (c.tag) {
    case StabilityTag::StableSymmetric: return Region::Stable;
    case StabilityTag::HopfInstability: return Region::Hopf;
    case StabilityTag::StaticInstability:
      return c.subtype == StaticKind::BistableFold ? Region::Bistable : Region::Asymmetric;
  }
  return Region::Error;
}

template <typename Real>
void scan_fixed_pump(ScanCell<Real>& cell, const DimerParams<Real>& p) {
  const auto states = solve_symmetric_steady_states(p);
  cell.rootCount = static_cast<int>(states.size());
  for (const auto& s : states) cell.branches.push_back(classify(s, p, cell.rootCount));
  cell.region = cell.rootCount == 3 ? Region::Bistable : region_of(cell.branches.front());
  if (cell.rootCount == 3) cell.upperBranch = cell.branches.back();
}

template <typename Real>
void scan_pump_sweep(ScanCell<Real>& cell, DimerParams<Real> p, Real pumpMax, int steps) {
  const auto folds = fold_intensities(p);
  cell.rootCount = folds ? 3 : 1;
  for (int k = 1; k <= steps; ++k) {
    p.pump = pumpMax * k / steps;
    SymmetricSteadyState<Real> s;
    try {
      s = steady_state_on_branch(p, Branch::Lower);
    } catch (const BranchAbsent& fold) {
      cell.region = Region::Bistable;
      cell.thresholdPump = static_cast<Real>(fold.foldPump);
      p.pump = cell.thresholdPump * Real(1.001);
      cell.upperBranch = classify(steady_state_on_branch(p, Branch::Upper), p, 1);
      return;
    }
    const int roots = static_cast<int>(solve_symmetric_steady_states(p).size());
    const auto c = classify(s, p, roots);
    if (c.tag != StabilityTag::StableSymmetric) {
      cell.region = region_of(c);
      cell.thresholdPump = p.pump;
      cell.branches.push_back(c);
      return;
    }
  }
  cell.region = Region::Stable;
}

// per-cell failures are recorded in the cell and the scan continues
template <typename Real>
std::vector<ScanCell<Real>> scan_bifurcation(const ScanPlane<Real>& plane, const DimerParams<Real>& fixed) {
  const bool pumpAxis = plane.x.axis == Axis::Pump || plane.y.axis == Axis::Pump;
  std::vector<ScanCell<Real>> grid;
  grid.reserve(static_cast<size_t>(plane.x.count) * plane.y.count);
  for (int iy = 0; iy < plane.y.count; ++iy) {
    for (int ix = 0; ix < plane.x.count; ++ix) {
      ScanCell<Real> cell;
      cell.x = plane.x.at(ix);
      cell.y = plane.y.at(iy);
      DimerParams<Real> p = fixed;
      set_axis(p, plane.x.axis, cell.x);
      set_axis(p, plane.y.axis, cell.y);
      try {
        validate(p);
        if (pumpAxis) scan_fixed_pump(cell, p);
        else scan_pump_sweep(cell, p, plane.pumpMax, plane.pumpSteps);
      } catch (const std::exception& e) {
        cell.region = Region::Error;
        cell.error = e.what();
      }
      grid.push_back(std::move(cell));
    }
  }
  return grid;
}

}  // namespace qdimer
