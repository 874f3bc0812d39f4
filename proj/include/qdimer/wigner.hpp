#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "qdimer/model.hpp"
#include "qdimer/spectra.hpp"

namespace qdimer {

using cd = std::complex<double>;
using FieldState = FieldAmplitudes<double>;

inline constexpr double kDivergenceNorm = 1e6;

struct SimConfig {
  enum class Estimator { Linearized, Quadratic };
  enum class MeanMode { Classical, Empirical };

  double dt = 1e-3;
  int windowSteps = 40;
  int lagCount = 512;
  int lagStride = 1;
  double totalTime = 2e4;  // summed over the ensemble
  double transientTime = 100;
  std::uint64_t seed = 1;
  int trajectories = 1;
  Estimator estimator = Estimator::Linearized;
  MeanMode meanMode = MeanMode::Classical;
  bool hannTaper = false;
  int threads = 0;  // 0: hardware concurrency

  double windowLength() const { return windowSteps * dt; }
  double lagSpacing() const { return lagStride * windowLength(); }
  long long windowsPerTrajectory() const;
};

void validate(const SimConfig& c);

class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t index);
  // complex Gaussian with independent quadratures of the given variance each
  cd gaussian(double quadratureVariance);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

cd sample_noise_increment(NoiseStream& rng, double dt, double ns, Mode mode, double gamma);

// noise increments for (a1, a2, b1, b2) over one step
using NoiseIncrements = std::array<cd, 4>;

NoiseIncrements draw_noise(NoiseStream& rng, double dt, const DimerParams<double>& p);

FieldState heun_step(const FieldState& x, const DimerParams<double>& p, double dt, const NoiseIncrements& eta);

struct OutputSample {
  double time = 0;
  cd aOut1, aOut2, bOut1, bOut2;
};

// classical output means: sqrt(2 gbar) * field, plus E/sqrt(2) on the FH ports
OutputSample classical_outputs(const SymmetricSteadyState<double>& s, const DimerParams<double>& p);

// one trajectory started at `start`; emits a sample per window after the transient
void integrate_trajectory(const SimConfig& config, const DimerParams<double>& p, const FieldState& start,
                          std::uint64_t index, const std::function<void(const OutputSample&)>& sink);

std::vector<OutputSample> integrate_trajectory(const SimConfig& config, const DimerParams<double>& p,
                                               const FieldState& start, std::uint64_t index);

class CorrelationAccumulator {
 public:
  using Block = Eigen::Matrix<cd, 4, 8>;
  using Vec4 = Eigen::Matrix<cd, 4, 1>;

  CorrelationAccumulator(int lagCount, int lagStride, bool quadratic = false);

  // fluctuation of the four output amplitudes around the classical means;
  // `weights` are the classical output amplitudes, used for the quadratic estimator
  void push(const Vec4& fluctuation, const Vec4& weights = Vec4::Zero());
  void merge(const CorrelationAccumulator& other);

  int lagCount() const { return lagCount_; }
  int lagStride() const { return lagStride_; }
  long long count() const { return count_; }
  bool quadratic() const { return quadratic_; }

  // 8-component mean of (du1, du1*, du2, du2*, ...)
  Eigen::Matrix<cd, 8, 1> meanVector() const;
  // biased estimate <dw(t) dw(t + k lag)^T>, 8x8
  Eigen::Matrix<cd, 8, 8> corr(int k, bool subtractMean = false) const;
  // intensity covariance <dn(t) dn(t + k lag)^T>, 4x4, quadratic mode only
  Eigen::Matrix4d intensityCorr(int k, bool subtractMean = false) const;

 private:
  int lagCount_;
  int lagStride_;
  bool quadratic_;
  long long count_ = 0;
  long long pushed_ = 0;  // within the current stream, for the ring buffer
  std::vector<Block> sums_;
  Vec4 sum_ = Vec4::Zero();
  std::vector<Vec4> ring_;
  std::vector<Eigen::Matrix4d> isums_;
  Eigen::Vector4d isum_ = Eigen::Vector4d::Zero();
  std::vector<Eigen::Vector4d> iring_;
};

// streams one trajectory's samples into a fresh accumulator
CorrelationAccumulator accumulate_two_time_correlations(const SimConfig& config, const DimerParams<double>& p,
                                                        const SymmetricSteadyState<double>& steady,
                                                        std::uint64_t index);

CorrelationAccumulator accumulate_two_time_correlations(const std::vector<OutputSample>& samples,
                                                        const OutputSample& steadyOutputs, int lagCount,
                                                        int lagStride);

// bilinear weights of the output photon-number fluctuation in the 8-component basis
Eigen::Matrix<cd, 8, 1> output_weights(const SymmetricSteadyState<double>& s, const DimerParams<double>& p,
                                       Observable o, Sign sign);

double simulated_shot_noise(const SymmetricSteadyState<double>& s, const DimerParams<double>& p, Observable o);

Eigen::VectorXd simulation_frequency_grid(const SimConfig& config);

SpectrumSeries<double> estimate_spectra(const CorrelationAccumulator& acc, const SymmetricSteadyState<double>& s,
                                        const DimerParams<double>& p, Observable o, Sign sign,
                                        const SimConfig& config);

// merged estimate with stat_err from the spread of per-trajectory estimates
SpectrumSeries<double> estimate_spectra(const std::vector<CorrelationAccumulator>& perTrajectory,
                                        const SymmetricSteadyState<double>& s, const DimerParams<double>& p,
                                        Observable o, Sign sign, const SimConfig& config);

// runs config.trajectories independent trajectories, in parallel, from the steady state
std::vector<CorrelationAccumulator> run_ensemble(const SimConfig& config, const DimerParams<double>& p,
                                                 const SymmetricSteadyState<double>& steady);

}  // namespace qdimer
