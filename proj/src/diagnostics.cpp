#include "l1gibbs/diagnostics.hpp"

#include <fftw3.h>

#include "fftw_lock.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace l1gibbs {

std::size_t default_tau_max(std::size_t length) {
  if (length < 2) return 0;
  return std::min<std::size_t>(length - 1, 1000000);
}

namespace {

void check_series(const std::vector<double>& series, std::size_t tau_max, double& mean, double& var) {
  const std::size_t k = series.size();
  if (tau_max < 1 || k <= tau_max) {
    throw DiagnosticsError("autocorrelation: need series length > tau_max >= 1");
  }
  double s = 0.0;
  for (double x : series) s += x;
  mean = s / static_cast<double>(k);
  double v = 0.0;
  for (double x : series) v += (x - mean) * (x - mean);
  var = v / static_cast<double>(k);
  if (!(var > 0.0)) throw DiagnosticsError("autocorrelation: series has zero variance");
}

// Smallest 2^a 3^b 5^c 7^d >= n; FFTW is fastest on such sizes.
std::size_t fft_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p7 = 1; p7 < best; p7 *= 7)
    for (std::size_t p5 = p7; p5 < best; p5 *= 5)
      for (std::size_t p3 = p5; p3 < best; p3 *= 3) {
        std::size_t v = p3;
        while (v < n) v <<= 1;
        best = std::min(best, v);
      }
  return best;
}

}  // namespace

AcfResult autocorrelation_direct(const std::vector<double>& series, std::size_t tau_max, double t_s) {
  double mean, var;
  check_series(series, tau_max, mean, var);
  const std::size_t k = series.size();
  AcfResult out;
  out.t_s = t_s;
  out.r.resize(tau_max + 1);
  for (std::size_t tau = 0; tau <= tau_max; ++tau) {
    double s = 0.0;
    for (std::size_t i = 0; i + tau < k; ++i) s += (series[i] - mean) * (series[i + tau] - mean);
    out.r[tau] = s / (static_cast<double>(k - tau) * var);
  }
  out.r[0] = 1.0;
  return out;
}

AcfResult autocorrelation(const std::vector<double>& series, std::size_t tau_max, double t_s) {
  double mean, var;
  check_series(series, tau_max, mean, var);
  const std::size_t k = series.size();
  // Zero padding to k + tau_max keeps lags up to tau_max free of wrap-around.
  const std::size_t m = fft_size(k + tau_max);
  const std::size_t mc = m / 2 + 1;
  double* buf = fftw_alloc_real(m);
  fftw_complex* spec = fftw_alloc_complex(mc);
  if (!buf || !spec) {
    fftw_free(buf);
    fftw_free(spec);
    throw DiagnosticsError("autocorrelation: out of memory");
  }
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(m), buf, spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_1d(static_cast<int>(m), spec, buf, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < k; ++i) buf[i] = series[i] - mean;
  std::fill(buf + k, buf + m, 0.0);
  fftw_execute(fwd);
  for (std::size_t i = 0; i < mc; ++i) {
    spec[i][0] = spec[i][0] * spec[i][0] + spec[i][1] * spec[i][1];
    spec[i][1] = 0.0;
  }
  fftw_execute(bwd);
  AcfResult out;
  out.t_s = t_s;
  out.r.resize(tau_max + 1);
  for (std::size_t tau = 0; tau <= tau_max; ++tau) {
    out.r[tau] = buf[tau] / static_cast<double>(m) / (static_cast<double>(k - tau) * var);
  }
  out.r[0] = 1.0;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(buf);
  fftw_free(spec);
  return out;
}

double TemporalAcf::at(double time) const {
  if (t.empty() || time < t.front()) return r.empty() ? 0.0 : r.front();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  return r[static_cast<std::size_t>(it - t.begin()) - 1];
}

TemporalAcf temporal_acf(const AcfResult& acf) {
  TemporalAcf out;
  out.r = acf.r;
  out.t.resize(acf.r.size());
  for (std::size_t i = 0; i < acf.r.size(); ++i) out.t[i] = static_cast<double>(i) * acf.t_s;
  return out;
}

LagResult lag_below(const AcfResult& acf, double threshold) {
  LagResult out;
  for (std::size_t tau = 0; tau < acf.r.size(); ++tau) {
    if (acf.r[tau] < threshold) {
      out.converged = true;
      out.tau = tau;
      out.t = static_cast<double>(tau) * acf.t_s;
      return out;
    }
  }
  out.tau = acf.r.size();
  out.t = static_cast<double>(out.tau) * acf.t_s;
  return out;
}

std::string TestFunction::describe() const {
  switch (kind) {
    case Kind::kEigvecProjection: return "eigvec-projection";
    case Kind::kCoordinate: return "coordinate";
    case Kind::kCustomLinear: return "custom-linear";
  }
  return "?";
}

TestFunction TestFunction::coordinate(Index n, Index i) {
  TestFunction f;
  f.kind = Kind::kCoordinate;
  f.direction = VectorXd::Zero(n);
  f.direction[i] = 1.0;
  return f;
}

TestFunction TestFunction::linear(VectorXd w) {
  const double norm = w.norm();
  if (!(norm > 0.0)) throw DiagnosticsError("TestFunction: zero direction");
  TestFunction f;
  f.kind = Kind::kCustomLinear;
  f.direction = w / norm;
  return f;
}

namespace {

// Power iteration for the top eigenpair of a symmetric positive
// semidefinite map, optionally deflated by `avoid`.
template <class Apply>
bool power_iterate(const Apply& apply, Index n, const VectorXd* avoid, int max_iterations, double tol,
                   VectorXd& v, double& lambda, int& iterations, double& ratio) {
  v = VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  // Break symmetry with a fixed deterministic perturbation.
  for (Index i = 0; i < n; ++i) v[i] += 1e-3 * std::sin(1.0 + static_cast<double>(i));
  if (avoid) v -= avoid->dot(v) * *avoid;
  v.normalize();
  VectorXd w;
  double prev_step = 0.0;
  ratio = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    apply(v, w);
    if (avoid) w -= avoid->dot(w) * *avoid;
    lambda = v.dot(w);
    // A tiny residual means v sits in a near-invariant subspace. With a
    // near-tie at the top the step rule alone would stall for a long time.
    const double residual = (w - lambda * v).norm();
    const double norm = w.norm();
    if (!(norm > 0.0)) {
      iterations = it;
      return true;
    }
    w /= norm;
    const double step = (w - v).norm();
    if (prev_step > 0.0) ratio = step / prev_step;
    prev_step = step;
    v.swap(w);
    if (step < tol || residual <= 1e3 * tol * std::fabs(lambda)) {
      iterations = it;
      return true;
    }
  }
  iterations = max_iterations;
  return false;
}

}  // namespace

EigvecResult leading_eigvec(const MatrixXd& samples, int max_iterations, double tol, Index explicit_limit) {
  const Index k = samples.rows();
  const Index n = samples.cols();
  if (k < 2 || n < 1) throw DiagnosticsError("leading_eigvec: need at least two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const double scale = 1.0 / static_cast<double>(k - 1);

  MatrixXd cov;
  const bool explicit_cov = n <= explicit_limit;
  if (explicit_cov) {
    const MatrixXd centered = samples.rowwise() - mean;
    cov.noalias() = scale * centered.transpose() * centered;
  }
  auto apply = [&](const VectorXd& v, VectorXd& out) {
    if (explicit_cov) {
      out.noalias() = cov * v;
      return;
    }
    VectorXd xv = samples * v;
    xv.array() -= mean.dot(v);
    out.noalias() = scale * (samples.transpose() * xv);
    out -= scale * xv.sum() * mean.transpose();
  };

  EigvecResult res;
  VectorXd v;
  double lambda = 0.0, ratio = 0.0;
  if (!power_iterate(apply, n, nullptr, max_iterations, tol, v, lambda, res.iterations, ratio)) {
    std::ostringstream os;
    os << "leading_eigvec: no convergence after " << max_iterations
       << " iterations; estimated eigenvalue ratio " << ratio;
    throw DiagnosticsError(os.str());
  }
  Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0.0) v = -v;
  res.eigenvalue = lambda;
  if (n > 1) {
    VectorXd v2;
    double lambda2 = 0.0, ratio2 = 0.0;
    int it2 = 0;
    power_iterate(apply, n, &v, std::min(max_iterations, 20000), 1e-8, v2, lambda2, it2, ratio2);
    res.second_eigenvalue = lambda2;
    res.degenerate = lambda > 0.0 && lambda2 >= (1.0 - 1e-3) * lambda;
  }
  res.function.kind = TestFunction::Kind::kEigvecProjection;
  res.function.direction = v;
  return res;
}

VectorXd cm_estimate(const MatrixXd& samples) {
  if (samples.rows() == 0) throw DiagnosticsError("cm_estimate: empty chain");
  return samples.colwise().mean().transpose();
}

VectorXd cm_estimate(const Chain& chain) { return cm_estimate(chain.samples); }

std::vector<double> burn_in_curve(const PosteriorModel& model, const SamplerSpec& spec, int n_chains,
                                  std::size_t max_steps, std::uint64_t seed, int threads,
                                  std::size_t trace_stride, const ChainConfig& base) {
  if (n_chains < 1) throw DiagnosticsError("burn_in_curve: need at least one chain");
  ChainConfig config = base;
  config.burn_in = max_steps;
  config.samples = 0;
  config.seed = seed;
  config.store_samples = false;
  config.trace_burn_in = true;
  config.burn_in_trace_stride = std::max<std::size_t>(trace_stride, 1);
  config.projections.clear();
  std::vector<Chain> chains;
  if (n_chains == 1) {
    chains.push_back(run_chain(model, spec, config));
  } else {
    chains = run_chains(model, spec, config, n_chains, threads);
  }
  std::vector<double> mean(chains.front().burn_in_trace.size(), 0.0);
  for (const Chain& c : chains) {
    if (c.aborted) throw DiagnosticsError("burn_in_curve: chain aborted: " + c.error);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += c.burn_in_trace[i];
  }
  for (double& x : mean) x /= static_cast<double>(chains.size());
  return mean;
}

std::size_t plateau_index(const std::vector<double>& trace, double tail_fraction, double band_sds,
                          double smoothing_fraction) {
  const std::size_t len = trace.size();
  if (len == 0) throw DiagnosticsError("plateau_index: empty trace");
  const std::size_t tail = std::max<std::size_t>(2, static_cast<std::size_t>(tail_fraction * len));
  if (tail > len) return 0;
  double mu = 0.0;
  for (std::size_t i = len - tail; i < len; ++i) mu += trace[i];
  mu /= static_cast<double>(tail);
  double var = 0.0;
  for (std::size_t i = len - tail; i < len; ++i) var += (trace[i] - mu) * (trace[i] - mu);
  const double band = band_sds * std::sqrt(var / static_cast<double>(tail - 1));

  const std::size_t half = static_cast<std::size_t>(0.5 * smoothing_fraction * len);
  std::vector<double> prefix(len + 1, 0.0);
  for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + trace[i];
  std::size_t first = len;
  for (std::size_t i = len; i-- > 0;) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(len, i + half + 1);
    const double smooth = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    if (std::fabs(smooth - mu) > band) break;
    first = i;
  }
  return first;
}

}  // namespace l1gibbs
