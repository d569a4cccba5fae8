#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "l1gibbs/samplers.hpp"

namespace l1gibbs {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Autocorrelation R(tau), tau = 0..tau_max, of one scalar test-function
/// series, together with the wall time per sample that produced it.
struct AcfResult {
  std::vector<double> r;
  double t_s = 1.0;
  std::string sampler;
  std::string test_function;
};

/// Default tau_max: min(K - 1, 10^6).
std::size_t default_tau_max(std::size_t length);

/// R(tau) = sum_{i < K - tau} (g_i - mu)(g_{i+tau} - mu) / ((K - tau) rho), with
/// mean mu and variance rho taken over the whole series. Lag products are
/// summed through FFTW on a zero-padded copy.
AcfResult autocorrelation(const std::vector<double>& series, std::size_t tau_max, double t_s = 1.0);

/// Same estimator by direct summation, O(K tau_max).
AcfResult autocorrelation_direct(const std::vector<double>& series, std::size_t tau_max, double t_s = 1.0);

/// R*(t) sampled at t = i t_s.
struct TemporalAcf {
  std::vector<double> t;
  std::vector<double> r;
  /// Step interpolation: R* at the last grid point not after `time`.
  double at(double time) const;
};

TemporalAcf temporal_acf(const AcfResult& acf);

struct LagResult {
  bool converged = false;  // false when R never drops below the threshold
  std::size_t tau = 0;
  double t = 0.0;
};

/// First tau with R(tau) < threshold.
LagResult lag_below(const AcfResult& acf, double threshold = 0.01);

struct TestFunction {
  enum class Kind { kEigvecProjection, kCoordinate, kCustomLinear };
  Kind kind = Kind::kCustomLinear;
  VectorXd direction;
  std::string describe() const;

  static TestFunction coordinate(Index n, Index i);
  static TestFunction linear(VectorXd w);
};

struct EigvecResult {
  TestFunction function;
  double eigenvalue = 0.0;
  /// Second eigenvalue from a deflated power iteration; `degenerate` is set
  /// when the top two are equal to within 1e-3 relative, in which case the
  /// direction is an arbitrary vector in the top eigenspace.
  double second_eigenvalue = 0.0;
  bool degenerate = false;
  int iterations = 0;
};

/// Leading eigenvector of the sample covariance of the rows of `samples` by
/// power iteration. The covariance is formed explicitly only when
/// n <= explicit_limit; otherwise it is applied through the centered
/// samples. Sign fixed so the largest-magnitude entry is positive.
EigvecResult leading_eigvec(const MatrixXd& samples, int max_iterations = 200000, double tol = 1e-11,
                            Index explicit_limit = 2048);

/// Conditional-mean estimate: mean of the retained samples (u-coordinates).
VectorXd cm_estimate(const Chain& chain);
VectorXd cm_estimate(const MatrixXd& samples);

/// Per-step mean of log posterior over independent chains started at the
/// same point, recorded every trace_stride samples over max_steps samples.
std::vector<double> burn_in_curve(const PosteriorModel& model, const SamplerSpec& spec, int n_chains,
                                  std::size_t max_steps, std::uint64_t seed, int threads = 1,
                                  std::size_t trace_stride = 1, const ChainConfig& base = {});

/// Smallest index from which a centered moving average of the trace stays
/// within band_sds standard deviations of the mean of its last
/// tail_fraction. The moving average spans 2% of the trace (at least one
/// point); without it, ordinary tail noise would keep leaving the band.
std::size_t plateau_index(const std::vector<double>& trace, double tail_fraction = 0.2,
                          double band_sds = 2.0, double smoothing_fraction = 0.02);

}  // namespace l1gibbs
