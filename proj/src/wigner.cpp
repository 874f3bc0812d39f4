#include "qdimer/wigner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace qdimer {

long long SimConfig::windowsPerTrajectory() const {
  return std::llround(totalTime / (trajectories * windowLength()));
}

void validate(const SimConfig& c) {
  if (!(c.dt > 0) || !std::isfinite(c.dt)) throw InvalidArgument("dt must be positive");
  if (c.windowSteps < 1) throw InvalidArgument("windowSteps must be >= 1");
  if (c.lagCount < 2) throw InvalidArgument("lagCount must be >= 2");
  if (c.lagStride < 1) throw InvalidArgument("lagStride must be >= 1");
  if (!(c.transientTime >= 0)) throw InvalidArgument("transientTime must be >= 0");
  if (!(c.totalTime > 0)) throw InvalidArgument("totalTime must be positive");
  if (c.trajectories < 1) throw InvalidArgument("trajectories must be >= 1");
  if (c.threads < 0) throw InvalidArgument("threads must be >= 0");
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e3779b9u};
  engine_.seed(seq);
}

cd NoiseStream::gaussian(double quadratureVariance) {
  const double s = std::sqrt(quadratureVariance);
  const double re = normal_(engine_);
  const double im = normal_(engine_);
  return {s * re, s * im};
}

cd sample_noise_increment(NoiseStream& rng, double dt, double ns, Mode mode, double gamma) {
  const cd w = rng.gaussian(dt / (4 * ns));
  return (mode == Mode::FH ? std::sqrt(2.0) : std::sqrt(2 * gamma)) * w;
}

NoiseIncrements draw_noise(NoiseStream& rng, double dt, const DimerParams<double>& p) {
  return {sample_noise_increment(rng, dt, p.ns, Mode::FH, p.gamma),
          sample_noise_increment(rng, dt, p.ns, Mode::SH, p.gamma),
          sample_noise_increment(rng, dt, p.ns, Mode::FH, p.gamma),
          sample_noise_increment(rng, dt, p.ns, Mode::SH, p.gamma)};
}

namespace {

FieldState axpy(const FieldState& x, double a, const FieldState& f, const NoiseIncrements& eta) {
  return {x.a1 + a * f.a1 + eta[0], x.a2 + a * f.a2 + eta[1], x.b1 + a * f.b1 + eta[2], x.b2 + a * f.b2 + eta[3]};
}

}  // namespace

FieldState heun_step(const FieldState& x, const DimerParams<double>& p, double dt, const NoiseIncrements& eta) {
  const FieldState f0 = drift(p, x);
  const FieldState pred = axpy(x, dt, f0, eta);
  const FieldState f1 = drift(p, pred);
  const FieldState sum{f0.a1 + f1.a1, f0.a2 + f1.a2, f0.b1 + f1.b1, f0.b2 + f1.b2};
  FieldState out = axpy(x, dt / 2, sum, eta);
  if (!(norm(out) <= kDivergenceNorm)) throw DivergenceError("field norm exceeded divergence threshold", -1, NAN);
  return out;
}

OutputSample classical_outputs(const SymmetricSteadyState<double>& s, const DimerParams<double>& p) {
  const double g1 = std::sqrt(2.0), g2 = std::sqrt(2 * p.gamma);
  const double offset = p.pump / std::sqrt(2.0);
  return {0, g1 * s.a1 + offset, g2 * s.a2, g1 * s.a1 + offset, g2 * s.a2};
}

void integrate_trajectory(const SimConfig& config, const DimerParams<double>& p, const FieldState& start,
                          std::uint64_t index, const std::function<void(const OutputSample&)>& sink) {
  validate(config);
  validate(p);
  NoiseStream rng(config.seed, index);
  const double dt = config.dt;
  const long long transientSteps = std::llround(config.transientTime / dt);
  const long long windows = config.windowsPerTrajectory();
  const double g1 = std::sqrt(2.0), g2 = std::sqrt(2 * p.gamma);
  const double offset = p.pump / std::sqrt(2.0);
  const double span = config.windowLength();

  FieldState x = start;
  long long step = 0;
  auto advance = [&](const NoiseIncrements& eta) {
    try {
      x = heun_step(x, p, dt, eta);
    } catch (const DivergenceError&) {
      std::ostringstream msg;
      msg << "trajectory " << index << " diverged at t=" << step * dt;
      throw DivergenceError(msg.str(), static_cast<long long>(index), step * dt);
    }
    ++step;
  };

  for (long long s = 0; s < transientSteps; ++s) advance(draw_noise(rng, dt, p));

  for (long long w = 0; w < windows; ++w) {
    FieldState field{};
    NoiseIncrements noise{};
    for (int s = 0; s < config.windowSteps; ++s) {
      const NoiseIncrements eta = draw_noise(rng, dt, p);
      const FieldState before = x;
      advance(eta);
      field.a1 += (before.a1 + x.a1) * 0.5;
      field.a2 += (before.a2 + x.a2) * 0.5;
      field.b1 += (before.b1 + x.b1) * 0.5;
      field.b2 += (before.b2 + x.b2) * 0.5;
      for (int k = 0; k < 4; ++k) noise[k] += eta[k];
    }
    const double n = config.windowSteps;
    // eta = sqrt(2 gbar) * dW, the input noise averaged over the window is sum(dW) / span
    OutputSample out;
    out.time = (transientSteps + (w + 0.5) * config.windowSteps) * dt;
    out.aOut1 = g1 * field.a1 / n - noise[0] / (g1 * span) + offset;
    out.aOut2 = g2 * field.a2 / n - noise[1] / (g2 * span);
    out.bOut1 = g1 * field.b1 / n - noise[2] / (g1 * span) + offset;
    out.bOut2 = g2 * field.b2 / n - noise[3] / (g2 * span);
    sink(out);
  }
}

std::vector<OutputSample> integrate_trajectory(const SimConfig& config, const DimerParams<double>& p,
                                               const FieldState& start, std::uint64_t index) {
  std::vector<OutputSample> out;
  integrate_trajectory(config, p, start, index, [&](const OutputSample& s) { out.push_back(s); });
  return out;
}

CorrelationAccumulator::CorrelationAccumulator(int lagCount, int lagStride, bool quadratic)
    : lagCount_(lagCount), lagStride_(lagStride), quadratic_(quadratic) {
  if (lagCount < 2 || lagStride < 1) throw InvalidArgument("accumulator needs lagCount >= 2 and lagStride >= 1");
  sums_.assign(lagCount, Block::Zero());
  ring_.assign(static_cast<size_t>(lagCount - 1) * lagStride + 1, Vec4::Zero());
  if (quadratic_) {
    isums_.assign(lagCount, Eigen::Matrix4d::Zero());
    iring_.assign(ring_.size(), Eigen::Vector4d::Zero());
  }
}

void CorrelationAccumulator::push(const Vec4& u, const Vec4& weights) {
  const long long L = static_cast<long long>(ring_.size());
  const long long pos = pushed_ % L;
  ring_[pos] = u;
  Eigen::Matrix<cd, 1, 8> row;
  row << u.transpose(), u.conjugate().transpose();
  for (int k = 0; k < lagCount_; ++k) {
    const long long lag = static_cast<long long>(k) * lagStride_;
    if (lag > pushed_) break;
    sums_[k].noalias() += ring_[(pushed_ - lag) % L] * row;
  }
  sum_ += u;

  if (quadratic_) {
    Eigen::Vector4d dn;
    for (int i = 0; i < 4; ++i) dn(i) = std::norm(weights(i) + u(i)) - std::norm(weights(i));
    iring_[pos] = dn;
    for (int k = 0; k < lagCount_; ++k) {
      const long long lag = static_cast<long long>(k) * lagStride_;
      if (lag > pushed_) break;
      isums_[k].noalias() += iring_[(pushed_ - lag) % L] * dn.transpose();
    }
    isum_ += dn;
  }
  ++pushed_;
  ++count_;
}

void CorrelationAccumulator::merge(const CorrelationAccumulator& other) {
  if (other.lagCount_ != lagCount_ || other.lagStride_ != lagStride_ || other.quadratic_ != quadratic_)
    throw InvalidArgument("cannot merge accumulators with different lag layouts");
  for (int k = 0; k < lagCount_; ++k) sums_[k] += other.sums_[k];
  sum_ += other.sum_;
  if (quadratic_) {
    for (int k = 0; k < lagCount_; ++k) isums_[k] += other.isums_[k];
    isum_ += other.isum_;
  }
  count_ += other.count_;
  // later pushes start a new stream rather than correlate across trajectories
  pushed_ = 0;
}

Eigen::Matrix<cd, 8, 1> CorrelationAccumulator::meanVector() const {
  Eigen::Matrix<cd, 8, 1> m = Eigen::Matrix<cd, 8, 1>::Zero();
  if (count_ == 0) return m;
  for (int i = 0; i < 4; ++i) {
    m(2 * i) = sum_(i) / double(count_);
    m(2 * i + 1) = std::conj(m(2 * i));
  }
  return m;
}

Eigen::Matrix<cd, 8, 8> CorrelationAccumulator::corr(int k, bool subtractMean) const {
  Eigen::Matrix<cd, 8, 8> c = Eigen::Matrix<cd, 8, 8>::Zero();
  if (count_ == 0) return c;
  const Block P = sums_.at(k) / double(count_);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      c(2 * i, 2 * j) = P(i, j);
      c(2 * i, 2 * j + 1) = P(i, 4 + j);
      c(2 * i + 1, 2 * j) = std::conj(P(i, 4 + j));
      c(2 * i + 1, 2 * j + 1) = std::conj(P(i, j));
    }
  }
  if (subtractMean) {
    const auto m = meanVector();
    c -= m * m.transpose();
  }
  return c;
}

Eigen::Matrix4d CorrelationAccumulator::intensityCorr(int k, bool subtractMean) const {
  if (!quadratic_) throw InvalidArgument("accumulator was not built for the quadratic estimator");
  if (count_ == 0) return Eigen::Matrix4d::Zero();
  Eigen::Matrix4d c = isums_.at(k) / double(count_);
  if (subtractMean) {
    const Eigen::Vector4d m = isum_ / double(count_);
    c -= m * m.transpose();
  }
  return c;
}

namespace {

CorrelationAccumulator::Vec4 to_vec(const OutputSample& s) {
  CorrelationAccumulator::Vec4 v;
  v << s.aOut1, s.aOut2, s.bOut1, s.bOut2;
  return v;
}

CorrelationAccumulator::Vec4 amplitude_weights(const SymmetricSteadyState<double>& s, const DimerParams<double>& p) {
  const cd w1 = std::sqrt(2.0) * s.a1, w2 = std::sqrt(2 * p.gamma) * s.a2;
  CorrelationAccumulator::Vec4 v;
  v << w1, w2, w1, w2;
  return v;
}

}  // namespace

CorrelationAccumulator accumulate_two_time_correlations(const std::vector<OutputSample>& samples,
                                                        const OutputSample& steadyOutputs, int lagCount,
                                                        int lagStride) {
  if (static_cast<long long>(samples.size()) < 10LL * lagCount)
    throw InsufficientData("fewer than 10*lagCount windows of data");
  CorrelationAccumulator acc(lagCount, lagStride);
  const auto mean = to_vec(steadyOutputs);
  for (const auto& s : samples) acc.push(to_vec(s) - mean);
  return acc;
}

CorrelationAccumulator accumulate_two_time_correlations(const SimConfig& config, const DimerParams<double>& p,
                                                        const SymmetricSteadyState<double>& steady,
                                                        std::uint64_t index) {
  CorrelationAccumulator acc(config.lagCount, config.lagStride,
                             config.estimator == SimConfig::Estimator::Quadratic);
  const auto mean = to_vec(classical_outputs(steady, p));
  const auto weights = amplitude_weights(steady, p);
  integrate_trajectory(config, p, symmetric_fields(steady), index,
                       [&](const OutputSample& s) { acc.push(to_vec(s) - mean, weights); });
  return acc;
}

namespace {

// (first mode, second mode) in the (a1, a2, b1, b2) ordering; second < 0 for monomer observables
std::pair<int, int> modes_of(Observable o) {
  switch (o) {
    case Observable::A1A2: return {0, 1};
    case Observable::A1B2: return {0, 3};
    case Observable::A1B1: return {0, 2};
    case Observable::A2B2: return {1, 3};
    case Observable::A1: return {0, -1};
    case Observable::A2: return {1, -1};
  }
  return {0, -1};
}

}  // namespace

Eigen::Matrix<cd, 8, 1> output_weights(const SymmetricSteadyState<double>& s, const DimerParams<double>& p,
                                       Observable o, Sign sign) {
  const auto w = amplitude_weights(s, p);
  const auto [j, k] = modes_of(o);
  Eigen::Matrix<cd, 8, 1> c = Eigen::Matrix<cd, 8, 1>::Zero();
  c(2 * j) = std::conj(w(j));
  c(2 * j + 1) = w(j);
  if (k >= 0) {
    const double pm = sign == Sign::Plus ? 1 : -1;
    c(2 * k) = pm * std::conj(w(k));
    c(2 * k + 1) = pm * w(k);
  }
  return c;
}

double simulated_shot_noise(const SymmetricSteadyState<double>& s, const DimerParams<double>& p, Observable o) {
  const auto w = amplitude_weights(s, p);
  const auto [j, k] = modes_of(o);
  double level = std::norm(w(j));
  if (k >= 0) level += std::norm(w(k));
  return level / p.ns;
}

Eigen::VectorXd simulation_frequency_grid(const SimConfig& config) {
  const int n = config.lagCount;
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = 2 * std::numbers::pi * (i - n / 2) / (n * config.lagSpacing());
  return w;
}

namespace {

// lag-domain scalar correlation r_k of the chosen photon-number combination
std::vector<cd> scalar_correlations(const CorrelationAccumulator& acc, const SymmetricSteadyState<double>& s,
                                    const DimerParams<double>& p, Observable o, Sign sign, const SimConfig& config) {
  const bool empirical = config.meanMode == SimConfig::MeanMode::Empirical;
  std::vector<cd> r(acc.lagCount());
  if (acc.quadratic()) {
    const auto [j, k] = modes_of(o);
    Eigen::Vector4d e = Eigen::Vector4d::Zero();
    e(j) = 1;
    if (k >= 0) e(k) = sign == Sign::Plus ? 1 : -1;
    for (int i = 0; i < acc.lagCount(); ++i) r[i] = e.dot(acc.intensityCorr(i, empirical) * e);
    return r;
  }
  const auto c = output_weights(s, p, o, sign);
  for (int i = 0; i < acc.lagCount(); ++i) r[i] = c.transpose() * acc.corr(i, empirical) * c;
  return r;
}

Eigen::VectorXd transform(const std::vector<cd>& r, const SimConfig& config, const Eigen::VectorXd& grid,
                          double shot) {
  const int n = static_cast<int>(r.size());
  const double d = config.lagSpacing();
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    cd acc = r[0];
    for (int k = 1; k < n; ++k) {
      const double h = config.hannTaper ? 0.5 * (1 + std::cos(std::numbers::pi * k / n)) : 1.0;
      acc += 2.0 * h * r[k] * std::cos(grid(i) * k * d);
    }
    v(i) = (d * acc).real() / shot;
  }
  return v;
}

}  // namespace

SpectrumSeries<double> estimate_spectra(const CorrelationAccumulator& acc, const SymmetricSteadyState<double>& s,
                                        const DimerParams<double>& p, Observable o, Sign sign,
                                        const SimConfig& config) {
  if (acc.count() < 10LL * acc.lagCount()) throw InsufficientData("fewer than 10*lagCount windows of data");
  const double shot = simulated_shot_noise(s, p, o);
  if (!(shot > 0)) throw InvalidArgument("shot-noise normalization undefined at zero intensity");

  SpectrumSeries<double> out;
  out.observable = o;
  if (!is_monomer(o)) out.sign = sign;
  out.shotNoise = shot;
  out.omega = simulation_frequency_grid(config);

  const auto r = scalar_correlations(acc, s, p, o, sign, config);
  for (const auto& x : r)
    if (std::abs(x.imag()) > 1e-6 * std::abs(r[0]) + 1e-300) {
      out.warnings.push_back("lag correlation has a non-negligible imaginary part");
      break;
    }
  if (std::abs(r.back()) > 0.05 * std::abs(r.front()))
    out.warnings.push_back("window too short: correlation at the longest lag exceeds 5% of lag 0");
  out.values = transform(r, config, out.omega, shot);
  return out;
}

SpectrumSeries<double> estimate_spectra(const std::vector<CorrelationAccumulator>& perTrajectory,
                                        const SymmetricSteadyState<double>& s, const DimerParams<double>& p,
                                        Observable o, Sign sign, const SimConfig& config) {
  if (perTrajectory.empty()) throw InsufficientData("no trajectories");
  CorrelationAccumulator merged = perTrajectory.front();
  for (size_t i = 1; i < perTrajectory.size(); ++i) merged.merge(perTrajectory[i]);
  auto out = estimate_spectra(merged, s, p, o, sign, config);
  const auto n = static_cast<Eigen::Index>(perTrajectory.size());
  if (n < 2) return out;

  const double shot = out.shotNoise;
  Eigen::MatrixXd each(out.omega.size(), n);
  for (Eigen::Index t = 0; t < n; ++t)
    each.col(t) = transform(scalar_correlations(perTrajectory[t], s, p, o, sign, config), config, out.omega, shot);
  const Eigen::VectorXd mean = each.rowwise().mean();
  const Eigen::VectorXd var = (each.colwise() - mean).rowwise().squaredNorm() / double(n - 1);
  out.statErr = (var / double(n)).cwiseSqrt();
  return out;
}

std::vector<CorrelationAccumulator> run_ensemble(const SimConfig& config, const DimerParams<double>& p,
                                                 const SymmetricSteadyState<double>& steady) {
  validate(config);
  validate(p);
  if (config.windowsPerTrajectory() < 1) throw InvalidArgument("totalTime too short for a single window");
  const int n = config.trajectories;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::min(n, config.threads > 0 ? config.threads : static_cast<int>(hw));

  std::vector<std::optional<CorrelationAccumulator>> slots(n);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(accumulate_two_time_correlations(config, p, steady, static_cast<std::uint64_t>(i)));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failureMutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CorrelationAccumulator> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace qdimer
