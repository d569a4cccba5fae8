#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <memory>
#include <string>
#include <vector>

namespace l1gibbs {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrixD = Eigen::SparseMatrix<double>;

/// Nonzero pattern of one operator column.
struct SparseColumn {
  std::vector<Index> index;
  std::vector<double> value;

  void clear() {
    index.clear();
    value.clear();
  }
  double dot(const VectorXd& v) const {
    double s = 0.0;
    for (std::size_t t = 0; t < index.size(); ++t) s += value[t] * v[index[t]];
    return s;
  }
  void axpy(double alpha, VectorXd& v) const {
    for (std::size_t t = 0; t < index.size(); ++t) v[index[t]] += alpha * value[t];
  }
  double squared_norm() const {
    double s = 0.0;
    for (double x : value) s += x * x;
    return s;
  }
};

/// A linear map R^n -> R^k given by its action and that of its adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual void apply(const VectorXd& u, VectorXd& out) const = 0;
  virtual void apply_adjoint(const VectorXd& w, VectorXd& out) const = 0;
  virtual std::string describe() const = 0;

  /// Column j. The default applies the operator to a unit vector.
  virtual void column(Index j, SparseColumn& out) const;

  /// Squared Euclidean norms of all columns.
  virtual VectorXd column_squared_norms() const;

  /// True when column() is cheap enough to call inside a Gibbs sweep.
  virtual bool has_local_columns() const { return false; }

  /// Explicit k x n matrix, built column by column unless overridden.
  virtual MatrixXd to_dense() const;

  VectorXd operator*(const VectorXd& u) const {
    VectorXd out;
    apply(u, out);
    return out;
  }
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(MatrixXd a) : a_(std::move(a)) {}
  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  void apply(const VectorXd& u, VectorXd& out) const override { out.noalias() = a_ * u; }
  void apply_adjoint(const VectorXd& w, VectorXd& out) const override {
    out.noalias() = a_.transpose() * w;
  }
  std::string describe() const override { return "dense"; }
  void column(Index j, SparseColumn& out) const override;
  VectorXd column_squared_norms() const override { return a_.colwise().squaredNorm(); }
  bool has_local_columns() const override { return true; }
  MatrixXd to_dense() const override { return a_; }
  const MatrixXd& matrix() const { return a_; }

 private:
  MatrixXd a_;
};

class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(SparseMatrixD a) : a_(std::move(a)) { a_.makeCompressed(); }
  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  void apply(const VectorXd& u, VectorXd& out) const override { out = a_ * u; }
  void apply_adjoint(const VectorXd& w, VectorXd& out) const override {
    out = a_.transpose() * w;
  }
  std::string describe() const override { return "sparse"; }
  void column(Index j, SparseColumn& out) const override;
  VectorXd column_squared_norms() const override;
  bool has_local_columns() const override { return true; }
  MatrixXd to_dense() const override { return MatrixXd(a_); }
  const SparseMatrixD& matrix() const { return a_; }

 private:
  SparseMatrixD a_;
};

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Index n) : n_(n) {}
  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  void apply(const VectorXd& u, VectorXd& out) const override { out = u; }
  void apply_adjoint(const VectorXd& w, VectorXd& out) const override { out = w; }
  std::string describe() const override { return "identity"; }
  void column(Index j, SparseColumn& out) const override;
  VectorXd column_squared_norms() const override { return VectorXd::Ones(n_); }
  bool has_local_columns() const override { return true; }

 private:
  Index n_;
};

/// 1-D coupling weights between pixels of width h for a Gaussian blur of
/// standard deviation s: the average over pixel i of the blurred indicator
/// of pixel j. Depends only on the offset d = i - j.
double gaussian_pixel_weight(long offset, double h, double s);

/// Blur of an N x N pixel image on [0,1]^2 by a Gaussian of standard
/// deviation `blur_sigma`, followed by pixel averaging, with reflective
/// (Neumann) boundaries.
///
/// Half-sample reflection turns the problem into a circular convolution on
/// the 2N x 2N symmetric extension, which FFTW handles directly. The kernel
/// is a tensor product, so the operator equals B (x) B for the N x N matrix
/// B of reflected 1-D weights; columns are cheap outer products.
/// The operator is symmetric, so the adjoint is the operator itself.
class Conv2DOperator final : public LinearOperator {
 public:
  Conv2DOperator(int grid, double blur_sigma);
  ~Conv2DOperator() override;
  Conv2DOperator(const Conv2DOperator&) = delete;
  Conv2DOperator& operator=(const Conv2DOperator&) = delete;

  Index rows() const override { return static_cast<Index>(grid_) * grid_; }
  Index cols() const override { return rows(); }
  void apply(const VectorXd& u, VectorXd& out) const override;
  void apply_adjoint(const VectorXd& w, VectorXd& out) const override { apply(w, out); }
  std::string describe() const override;
  void column(Index j, SparseColumn& out) const override;
  VectorXd column_squared_norms() const override;
  bool has_local_columns() const override { return true; }
  MatrixXd to_dense() const override;

  int grid() const { return grid_; }
  double blur_sigma() const { return blur_sigma_; }
  /// The N x N reflected 1-D weight matrix B.
  const MatrixXd& factor() const { return b_; }

 private:
  struct Fft;
  int grid_;
  double blur_sigma_;
  MatrixXd b_;
  // Per-column nonzeros of B: rows [lo, hi) with values.
  std::vector<int> lo_, hi_;
  std::unique_ptr<Fft> fft_;
};

/// Explicit forward-difference matrix (D u)_i = u_{i+1} - u_i, size (n-1) x n.
SparseMatrixD forward_difference(Index n);

}  // namespace l1gibbs
