#include "l1gibbs/linear_operator.hpp"

#include <fftw3.h>

#include "fftw_lock.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace l1gibbs {

void LinearOperator::column(Index j, SparseColumn& out) const {
  VectorXd e = VectorXd::Zero(cols());
  e[j] = 1.0;
  VectorXd col;
  apply(e, col);
  out.clear();
  for (Index i = 0; i < col.size(); ++i) {
    if (col[i] != 0.0) {
      out.index.push_back(i);
      out.value.push_back(col[i]);
    }
  }
}

VectorXd LinearOperator::column_squared_norms() const {
  VectorXd norms(cols());
  SparseColumn col;
  for (Index j = 0; j < cols(); ++j) {
    column(j, col);
    norms[j] = col.squared_norm();
  }
  return norms;
}

MatrixXd LinearOperator::to_dense() const {
  MatrixXd a = MatrixXd::Zero(rows(), cols());
  SparseColumn col;
  for (Index j = 0; j < cols(); ++j) {
    column(j, col);
    for (std::size_t t = 0; t < col.index.size(); ++t) a(col.index[t], j) = col.value[t];
  }
  return a;
}

void DenseOperator::column(Index j, SparseColumn& out) const {
  out.clear();
  for (Index i = 0; i < a_.rows(); ++i) {
    if (a_(i, j) != 0.0) {
      out.index.push_back(i);
      out.value.push_back(a_(i, j));
    }
  }
}

void SparseOperator::column(Index j, SparseColumn& out) const {
  out.clear();
  for (SparseMatrixD::InnerIterator it(a_, j); it; ++it) {
    out.index.push_back(it.row());
    out.value.push_back(it.value());
  }
}

VectorXd SparseOperator::column_squared_norms() const {
  VectorXd norms(a_.cols());
  for (Index j = 0; j < a_.cols(); ++j) norms[j] = a_.col(j).squaredNorm();
  return norms;
}

void IdentityOperator::column(Index j, SparseColumn& out) const {
  out.clear();
  out.index.push_back(j);
  out.value.push_back(1.0);
}

namespace {

// Antiderivative of the standard normal cdf at -z: phi(z) - z Phi(-z).
// Stays positive and small for large z, where the second differences below
// would otherwise cancel against the linear growth of zPhi(z) + phi(z).
double psi_neg(double z) {
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return phi - 0.5 * z * std::erfc(z / std::numbers::sqrt2);
}

}  // namespace

double gaussian_pixel_weight(long offset, double h, double s) {
  // The second difference of psi(z) = z Phi(z) + phi(z) is unchanged by
  // dropping its linear part, and psi(z) - z = psi(-z); evaluating at the
  // mirrored point keeps every term decaying.
  const double d = std::fabs(static_cast<double>(offset)) * h;
  const double scale = s / h;
  if (offset == 0) {
    // psi(h/s) - 2 psi(0) + psi(-h/s), with psi(h/s) = h/s + psi(-h/s).
    return scale * (h / s + 2.0 * psi_neg(h / s) - 2.0 * psi_neg(0.0));
  }
  return scale * (psi_neg((d + h) / s) - 2.0 * psi_neg(d / s) + psi_neg((d - h) / s));
}

struct Conv2DOperator::Fft {
  int m = 0;  // extended side 2N
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  std::vector<double> spectrum;  // real kernel spectrum, m x (m/2+1)

  ~Fft() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

Conv2DOperator::Conv2DOperator(int grid, double blur_sigma)
    : grid_(grid), blur_sigma_(blur_sigma) {
  if (grid < 1) throw std::invalid_argument("Conv2DOperator: grid must be positive");
  if (!(blur_sigma > 0.0)) throw std::invalid_argument("Conv2DOperator: blur sigma must be positive");
  if (4.0 * blur_sigma > 0.5) {
    throw std::invalid_argument("Conv2DOperator: kernel support exceeds half the domain");
  }
  const int n = grid;
  const int m = 2 * n;
  const double h = 1.0 / n;

  // Periodized 1-D kernel on the extended grid.
  std::vector<double> kper(m, 0.0);
  for (int d = 0; d < m; ++d) {
    for (int w = -2; w <= 2; ++w) kper[d] += gaussian_pixel_weight(d + static_cast<long>(w) * m, h, blur_sigma);
  }

  b_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      b_(i, j) = kper[((i - j) % m + m) % m] + kper[(i + j + 1) % m];
    }
  }
  const double cutoff = 1e-15 * b_.cwiseAbs().maxCoeff();
  lo_.resize(n);
  hi_.resize(n);
  for (int j = 0; j < n; ++j) {
    int lo = j, hi = j + 1;
    while (lo > 0 && std::fabs(b_(lo - 1, j)) > cutoff) --lo;
    while (hi < n && std::fabs(b_(hi, j)) > cutoff) ++hi;
    lo_[j] = lo;
    hi_[j] = hi;
  }

  fft_ = std::make_unique<Fft>();
  fft_->m = m;
  const int mc = m / 2 + 1;
  double* in = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(m) * mc);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fft_->forward = fftw_plan_dft_r2c_2d(m, m, in, out, FFTW_ESTIMATE);
    fft_->backward = fftw_plan_dft_c2r_2d(m, m, out, in, FFTW_ESTIMATE);
  }
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) in[r * m + c] = kper[r] * kper[c];
  }
  fftw_execute_dft_r2c(fft_->forward, in, out);
  // The kernel is even, so its spectrum is real.
  fft_->spectrum.resize(static_cast<std::size_t>(m) * mc);
  for (std::size_t t = 0; t < fft_->spectrum.size(); ++t) {
    fft_->spectrum[t] = out[t][0] / (static_cast<double>(m) * m);
  }
  fftw_free(in);
  fftw_free(out);
}

Conv2DOperator::~Conv2DOperator() = default;

std::string Conv2DOperator::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "conv2d grid=" << grid_ << " blur_sigma=" << blur_sigma_;
  return os.str();
}

void Conv2DOperator::apply(const VectorXd& u, VectorXd& out) const {
  if (u.size() != cols()) throw std::invalid_argument("Conv2DOperator::apply: size mismatch");
  const int n = grid_;
  const int m = fft_->m;
  const int mc = m / 2 + 1;
  // Fresh buffers per call so one operator can serve several threads; the
  // new-array execute functions are thread-safe.
  double* buf = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(m) * mc);
  for (int r = 0; r < m; ++r) {
    const int sr = r < n ? r : m - 1 - r;
    for (int c = 0; c < m; ++c) {
      const int sc = c < n ? c : m - 1 - c;
      buf[r * m + c] = u[static_cast<Index>(sr) * n + sc];
    }
  }
  fftw_execute_dft_r2c(fft_->forward, buf, spec);
  for (std::size_t t = 0; t < fft_->spectrum.size(); ++t) {
    spec[t][0] *= fft_->spectrum[t];
    spec[t][1] *= fft_->spectrum[t];
  }
  fftw_execute_dft_c2r(fft_->backward, spec, buf);
  out.resize(cols());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out[static_cast<Index>(r) * n + c] = buf[r * m + c];
  }
  fftw_free(buf);
  fftw_free(spec);
}

void Conv2DOperator::column(Index j, SparseColumn& out) const {
  const int n = grid_;
  const int r = static_cast<int>(j / n);
  const int c = static_cast<int>(j % n);
  out.clear();
  for (int rr = lo_[r]; rr < hi_[r]; ++rr) {
    const double br = b_(rr, r);
    for (int cc = lo_[c]; cc < hi_[c]; ++cc) {
      out.index.push_back(static_cast<Index>(rr) * n + cc);
      out.value.push_back(br * b_(cc, c));
    }
  }
}

VectorXd Conv2DOperator::column_squared_norms() const {
  const int n = grid_;
  const VectorXd b2 = b_.colwise().squaredNorm();
  VectorXd norms(static_cast<Index>(n) * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) norms[static_cast<Index>(r) * n + c] = b2[r] * b2[c];
  }
  return norms;
}

MatrixXd Conv2DOperator::to_dense() const {
  const int n = grid_;
  MatrixXd a(static_cast<Index>(n) * n, static_cast<Index>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (int rr = 0; rr < n; ++rr)
        for (int cc = 0; cc < n; ++cc)
          a(static_cast<Index>(rr) * n + cc, static_cast<Index>(r) * n + c) = b_(rr, r) * b_(cc, c);
  return a;
}

SparseMatrixD forward_difference(Index n) {
  SparseMatrixD d(n - 1, n);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * (n - 1));
  for (Index i = 0; i + 1 < n; ++i) {
    t.emplace_back(i, i, -1.0);
    t.emplace_back(i, i + 1, 1.0);
  }
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

}  // namespace l1gibbs
