#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "l1gibbs/expquad.hpp"
#include "l1gibbs/linear_operator.hpp"

namespace l1gibbs {

/// Change of variables u = V xi that turns |D u| into a plain sum of |xi_i|.
class Basis {
 public:
  enum class Kind { kIdentity, kStep, kDense };

  static Basis identity(Index n);
  /// Lower-triangular ones: u_j = xi_0 + ... + xi_j. xi_0 is the constant
  /// offset; xi_{i} for i >= 1 is the jump u_i - u_{i-1}.
  static Basis step(Index n);
  /// Arbitrary invertible V.
  static Basis dense(MatrixXd v);

  Kind kind() const { return kind_; }
  Index size() const { return n_; }
  std::string describe() const;

  VectorXd apply(const VectorXd& xi) const;          // u = V xi
  VectorXd apply_inverse(const VectorXd& u) const;   // xi = V^{-1} u
  VectorXd apply_transpose(const VectorXd& w) const; // V^T w
  /// Matrix-free product A V, column by column.
  SparseMatrixD times(const LinearOperator& a) const;
  MatrixXd to_dense() const;

 private:
  Kind kind_ = Kind::kIdentity;
  Index n_ = 0;
  std::shared_ptr<const MatrixXd> v_;
  std::shared_ptr<const Eigen::PartialPivLU<MatrixXd>> lu_;
};

/// Posterior exp(-|m - A u|^2 / (2 sigma^2) - lambda |D u|) together with
/// the transformed system in xi-coordinates.
///
/// `penalized[i]` marks the coefficients that carry the L1 term; with the
/// step basis this is every coefficient except the constant offset xi_0.
/// The noise variance is a working value that the hierarchical sampler may
/// replace between sweeps; everything precomputed elsewhere is kept free of
/// sigma and scaled at use.
class PosteriorModel {
 public:
  PosteriorModel(std::shared_ptr<const LinearOperator> op, VectorXd data, double noise_sigma,
                 double lambda, SparseMatrixD d, Basis basis, std::vector<char> penalized);

  Index n() const { return op_->cols(); }
  Index k() const { return op_->rows(); }
  const LinearOperator& op() const { return *op_; }
  std::shared_ptr<const LinearOperator> op_ptr() const { return op_; }
  const VectorXd& data() const { return data_; }
  double noise_sigma() const { return std::sqrt(noise_var_); }
  double noise_variance() const { return noise_var_; }
  void set_noise_variance(double v);
  /// 1 / (2 sigma^2): the factor that turns sigma-free quantities into Psi terms.
  double precision_half() const { return 0.5 / noise_var_; }
  double lambda() const { return lambda_; }
  void set_lambda(double lambda);
  const SparseMatrixD& d() const { return d_; }
  const Basis& basis() const { return basis_; }
  const std::vector<char>& penalized() const { return penalized_; }
  Index prior_rows() const { return d_.rows(); }

  /// Column i of A V without the 1/(sqrt(2) sigma) factor.
  void av_column(Index i, SparseColumn& out) const;
  /// A V as a stored sparse matrix (built on first use for non-identity bases).
  bool has_stored_av() const { return av_ != nullptr; }

  VectorXd scaled_data() const;                 // m / (sqrt(2) sigma)
  VectorXd psi_apply(const VectorXd& xi) const; // A V xi / (sqrt(2) sigma)

  VectorXd u_from_xi(const VectorXd& xi) const { return basis_.apply(xi); }
  VectorXd xi_from_u(const VectorXd& u) const { return basis_.apply_inverse(u); }

  /// Unnormalized log posterior in u: -|m - A u|^2/(2 sigma^2) - lambda |D u|.
  double log_posterior_u(const VectorXd& u) const;
  /// The same value from xi: -|mbar - Psi xi|^2 - lambda sum_pen |xi_i|.
  double log_posterior_xi(const VectorXd& xi) const;
  double data_misfit_u(const VectorXd& u) const;  // |m - A u|^2

 private:
  std::shared_ptr<const LinearOperator> op_;
  VectorXd data_;
  double noise_var_;
  double lambda_;
  SparseMatrixD d_;
  Basis basis_;
  std::vector<char> penalized_;
  std::shared_ptr<const SparseMatrixD> av_;  // null for the identity basis
};

enum class CacheMode { kAuto, kDenseGram, kOperator };
const char* to_string(CacheMode m);

struct CacheOptions {
  CacheMode mode = CacheMode::kAuto;
  /// Largest n for which the dense Gram matrix may be stored.
  Index dense_threshold = 4096;
  /// Commits between full recomputations of the running image; 0 means n.
  std::size_t refresh_interval = 0;
};

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Running state that makes the conditional coefficients cheap.
///
/// Dense-gram mode stores Phi = (A V)^T (A V) and evaluates b from a row of
/// Phi and xi. Operator mode keeps the image r = A V xi and evaluates b from
/// one column of A V against r; commits update r along that column and r is
/// recomputed from scratch every refresh_interval commits.
/// All stored quantities are sigma-free.
class CoefficientCache {
 public:
  CoefficientCache(const PosteriorModel& model, const VectorXd& xi0, CacheOptions options = {});

  CacheMode mode() const { return mode_; }
  const PosteriorModel& model() const { return *model_; }
  const VectorXd& xi() const { return xi_; }

  /// (a, b, c) of the conditional of xi_i given the rest.
  ExpQuadParams conditional_params(Index i) const;
  /// Set xi_i to `value` and update the running state.
  void commit(Index i, double value);
  /// Replace the whole state.
  void reset(const VectorXd& xi);
  /// Recompute the running image from xi (operator mode); no-op otherwise.
  void refresh();
  /// Throws CacheError if the tracked image has drifted from A V xi by more
  /// than `tol` relative to its norm.
  void verify(double tol = 1e-8) const;

  /// ||psi_i||^2 for the current sigma.
  VectorXd col_norms() const { return model_->precision_half() * norms_; }
  /// Phi for the current sigma (dense-gram mode only).
  MatrixXd gram() const;
  /// A V xi as tracked by the cache (operator mode), or recomputed.
  VectorXd image() const;
  double log_posterior() const;
  /// |m - A V xi|^2, from the tracked image when available.
  double data_misfit() const;

 private:
  const PosteriorModel* model_;
  CacheMode mode_;
  std::size_t refresh_interval_;
  std::size_t commits_since_refresh_ = 0;
  VectorXd xi_;
  VectorXd norms_;  // |A v_i|^2
  VectorXd g_;      // (A V)^T m
  MatrixXd gram_;   // dense mode
  VectorXd image_;  // operator mode: A V xi
  mutable SparseColumn column_;
};

}  // namespace l1gibbs
