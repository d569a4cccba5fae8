#include "l1gibbs/posterior.hpp"

#include <sstream>

namespace l1gibbs {

Basis Basis::identity(Index n) {
  Basis b;
  b.kind_ = Kind::kIdentity;
  b.n_ = n;
  return b;
}

Basis Basis::step(Index n) {
  Basis b;
  b.kind_ = Kind::kStep;
  b.n_ = n;
  return b;
}

Basis Basis::dense(MatrixXd v) {
  if (v.rows() != v.cols()) throw std::invalid_argument("Basis::dense: V must be square");
  Basis b;
  b.kind_ = Kind::kDense;
  b.n_ = v.rows();
  auto lu = std::make_shared<Eigen::PartialPivLU<MatrixXd>>(v);
  if (std::fabs(lu->determinant()) == 0.0) {
    throw std::invalid_argument("Basis::dense: V is singular");
  }
  b.v_ = std::make_shared<const MatrixXd>(std::move(v));
  b.lu_ = std::move(lu);
  return b;
}

std::string Basis::describe() const {
  switch (kind_) {
    case Kind::kIdentity: return "identity";
    case Kind::kStep: return "step";
    case Kind::kDense: return "dense";
  }
  return "?";
}

VectorXd Basis::apply(const VectorXd& xi) const {
  switch (kind_) {
    case Kind::kIdentity: return xi;
    case Kind::kStep: {
      VectorXd u(xi.size());
      double s = 0.0;
      for (Index i = 0; i < xi.size(); ++i) {
        s += xi[i];
        u[i] = s;
      }
      return u;
    }
    case Kind::kDense: return *v_ * xi;
  }
  return xi;
}

VectorXd Basis::apply_inverse(const VectorXd& u) const {
  switch (kind_) {
    case Kind::kIdentity: return u;
    case Kind::kStep: {
      VectorXd xi(u.size());
      if (u.size() > 0) xi[0] = u[0];
      for (Index i = 1; i < u.size(); ++i) xi[i] = u[i] - u[i - 1];
      return xi;
    }
    case Kind::kDense: return lu_->solve(u);
  }
  return u;
}

VectorXd Basis::apply_transpose(const VectorXd& w) const {
  switch (kind_) {
    case Kind::kIdentity: return w;
    case Kind::kStep: {
      VectorXd out(w.size());
      double s = 0.0;
      for (Index i = w.size() - 1; i >= 0; --i) {
        s += w[i];
        out[i] = s;
      }
      return out;
    }
    case Kind::kDense: return v_->transpose() * w;
  }
  return w;
}

MatrixXd Basis::to_dense() const {
  switch (kind_) {
    case Kind::kIdentity: return MatrixXd::Identity(n_, n_);
    case Kind::kStep: {
      MatrixXd v = MatrixXd::Zero(n_, n_);
      for (Index j = 0; j < n_; ++j) v.col(j).tail(n_ - j).setOnes();
      return v;
    }
    case Kind::kDense: return *v_;
  }
  return {};
}

SparseMatrixD Basis::times(const LinearOperator& a) const {
  const Index k = a.rows();
  std::vector<Eigen::Triplet<double>> trip;
  auto push_dense = [&](Index j, const VectorXd& col) {
    for (Index i = 0; i < k; ++i)
      if (col[i] != 0.0) trip.emplace_back(i, j, col[i]);
  };
  SparseColumn col;
  switch (kind_) {
    case Kind::kIdentity:
      for (Index j = 0; j < n_; ++j) {
        a.column(j, col);
        for (std::size_t t = 0; t < col.index.size(); ++t) trip.emplace_back(col.index[t], j, col.value[t]);
      }
      break;
    case Kind::kStep: {
      // Column j of A V is the sum of columns j..n-1 of A.
      std::vector<VectorXd> cols(n_);
      VectorXd acc = VectorXd::Zero(k);
      for (Index j = n_ - 1; j >= 0; --j) {
        a.column(j, col);
        col.axpy(1.0, acc);
        cols[j] = acc;
      }
      for (Index j = 0; j < n_; ++j) push_dense(j, cols[j]);
      break;
    }
    case Kind::kDense:
      for (Index j = 0; j < n_; ++j) push_dense(j, a * VectorXd(v_->col(j)));
      break;
  }
  SparseMatrixD av(k, n_);
  av.setFromTriplets(trip.begin(), trip.end());
  av.makeCompressed();
  return av;
}

PosteriorModel::PosteriorModel(std::shared_ptr<const LinearOperator> op, VectorXd data,
                               double noise_sigma, double lambda, SparseMatrixD d, Basis basis,
                               std::vector<char> penalized)
    : op_(std::move(op)),
      data_(std::move(data)),
      noise_var_(noise_sigma * noise_sigma),
      lambda_(lambda),
      d_(std::move(d)),
      basis_(std::move(basis)),
      penalized_(std::move(penalized)) {
  if (!op_) throw std::invalid_argument("PosteriorModel: null operator");
  if (data_.size() != op_->rows()) throw std::invalid_argument("PosteriorModel: data size != k");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("PosteriorModel: noise sigma must be positive");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("PosteriorModel: lambda must be non-negative");
  }
  if (d_.cols() != n() || d_.rows() > n()) throw std::invalid_argument("PosteriorModel: D has wrong shape");
  if (basis_.size() != n()) throw std::invalid_argument("PosteriorModel: basis size != n");
  if (static_cast<Index>(penalized_.size()) != n()) {
    throw std::invalid_argument("PosteriorModel: penalty mask size != n");
  }
  Index count = 0;
  for (char p : penalized_) count += p ? 1 : 0;
  if (count != d_.rows()) {
    throw std::invalid_argument("PosteriorModel: penalty mask does not match rank of D");
  }
  if (basis_.kind() != Basis::Kind::kIdentity || !op_->has_local_columns()) {
    av_ = std::make_shared<const SparseMatrixD>(basis_.times(*op_));
  }
}

void PosteriorModel::set_noise_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error("PosteriorModel: noise variance must be positive and finite");
  }
  noise_var_ = v;
}

void PosteriorModel::set_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("PosteriorModel: lambda must be non-negative");
  }
  lambda_ = lambda;
}

void PosteriorModel::av_column(Index i, SparseColumn& out) const {
  if (!av_) {
    op_->column(i, out);
    return;
  }
  out.clear();
  for (SparseMatrixD::InnerIterator it(*av_, i); it; ++it) {
    out.index.push_back(it.row());
    out.value.push_back(it.value());
  }
}

VectorXd PosteriorModel::scaled_data() const { return data_ / (std::sqrt(2.0) * noise_sigma()); }

VectorXd PosteriorModel::psi_apply(const VectorXd& xi) const {
  return (*op_ * basis_.apply(xi)) / (std::sqrt(2.0) * noise_sigma());
}

double PosteriorModel::data_misfit_u(const VectorXd& u) const {
  return (data_ - *op_ * u).squaredNorm();
}

double PosteriorModel::log_posterior_u(const VectorXd& u) const {
  const double prior = lambda_ > 0.0 ? (d_ * u).lpNorm<1>() : 0.0;
  return -precision_half() * data_misfit_u(u) - lambda_ * prior;
}

double PosteriorModel::log_posterior_xi(const VectorXd& xi) const {
  double prior = 0.0;
  for (Index i = 0; i < xi.size(); ++i)
    if (penalized_[i]) prior += std::fabs(xi[i]);
  return -precision_half() * data_misfit_u(basis_.apply(xi)) - lambda_ * prior;
}

const char* to_string(CacheMode m) {
  switch (m) {
    case CacheMode::kAuto: return "auto";
    case CacheMode::kDenseGram: return "dense-gram";
    case CacheMode::kOperator: return "operator";
  }
  return "?";
}

CoefficientCache::CoefficientCache(const PosteriorModel& model, const VectorXd& xi0,
                                   CacheOptions options)
    : model_(&model), mode_(options.mode) {
  const Index n = model.n();
  if (xi0.size() != n) throw std::invalid_argument("CoefficientCache: xi0 size != n");
  if (!xi0.allFinite()) throw std::invalid_argument("CoefficientCache: xi0 not finite");

  // Column norms and A V-transposed data, both sigma-free.
  norms_.resize(n);
  g_.resize(n);
  SparseColumn col;
  double nnz = 0.0;
  for (Index i = 0; i < n; ++i) {
    model.av_column(i, col);
    norms_[i] = col.squared_norm();
    g_[i] = col.dot(model.data());
    nnz += static_cast<double>(col.index.size());
  }
  for (Index i = 0; i < n; ++i) {
    // A vanishing penalized column leaves a Laplace conditional, which is
    // still proper; an unpenalized one leaves a flat direction.
    if (!(norms_[i] > 0.0) && !model.penalized()[static_cast<std::size_t>(i)]) {
      std::ostringstream os;
      os << "CoefficientCache: unpenalized column " << i
         << " of A V vanishes; ker(D) and ker(A) must intersect only in 0";
      throw CacheError(os.str());
    }
  }

  if (mode_ == CacheMode::kAuto) {
    // A Gram row costs n per update; an operator-mode update costs about
    // twice the column length.
    const bool dense_cheaper = 2.0 * nnz / static_cast<double>(n) >= static_cast<double>(n);
    mode_ = (dense_cheaper && n <= options.dense_threshold) ? CacheMode::kDenseGram
                                                            : CacheMode::kOperator;
  }
  if (mode_ == CacheMode::kDenseGram) {
    if (n > options.dense_threshold) {
      std::ostringstream os;
      os << "CoefficientCache: dense Gram matrix for n=" << n << " exceeds the threshold "
         << options.dense_threshold << "; use operator mode";
      throw CacheError(os.str());
    }
    MatrixXd av(model.k(), n);
    for (Index i = 0; i < n; ++i) {
      model.av_column(i, col);
      av.col(i).setZero();
      for (std::size_t t = 0; t < col.index.size(); ++t) av(col.index[t], i) = col.value[t];
    }
    gram_.noalias() = av.transpose() * av;
  }
  refresh_interval_ = options.refresh_interval > 0 ? options.refresh_interval
                                                   : static_cast<std::size_t>(n);
  reset(xi0);
}

void CoefficientCache::reset(const VectorXd& xi) {
  if (xi.size() != model_->n()) throw std::invalid_argument("CoefficientCache::reset: size mismatch");
  xi_ = xi;
  refresh();
}

void CoefficientCache::refresh() {
  commits_since_refresh_ = 0;
  if (mode_ == CacheMode::kOperator) image_ = model_->op() * model_->basis().apply(xi_);
}

ExpQuadParams CoefficientCache::conditional_params(Index i) const {
  const double s = model_->precision_half();
  double cross;  // (A v_i)^T (A V xi)
  if (mode_ == CacheMode::kDenseGram) {
    cross = gram_.col(i).dot(xi_);
  } else {
    model_->av_column(i, column_);
    cross = column_.dot(image_);
  }
  ExpQuadParams p;
  p.a = s * norms_[i];
  p.b = 2.0 * s * (g_[i] - cross + xi_[i] * norms_[i]);
  p.c = model_->penalized()[i] ? model_->lambda() : 0.0;
  return p;
}

void CoefficientCache::commit(Index i, double value) {
  const double delta = value - xi_[i];
  xi_[i] = value;
  if (mode_ != CacheMode::kOperator) return;
  if (delta != 0.0) {
    model_->av_column(i, column_);
    column_.axpy(delta, image_);
  }
  if (++commits_since_refresh_ >= refresh_interval_) refresh();
}

void CoefficientCache::verify(double tol) const {
  if (mode_ != CacheMode::kOperator) return;
  const VectorXd fresh = model_->op() * model_->basis().apply(xi_);
  const double err = (fresh - image_).norm();
  if (err > tol * std::max(1.0, fresh.norm())) {
    std::ostringstream os;
    os << "CoefficientCache: running image drifted by " << err;
    throw CacheError(os.str());
  }
}

MatrixXd CoefficientCache::gram() const {
  if (mode_ != CacheMode::kDenseGram) throw CacheError("CoefficientCache::gram: not in dense-gram mode");
  return model_->precision_half() * gram_;
}

VectorXd CoefficientCache::image() const {
  if (mode_ == CacheMode::kOperator) return image_;
  return model_->op() * model_->basis().apply(xi_);
}

double CoefficientCache::data_misfit() const {
  if (mode_ == CacheMode::kOperator) return (model_->data() - image_).squaredNorm();
  return model_->data_misfit_u(model_->basis().apply(xi_));
}

double CoefficientCache::log_posterior() const {
  double prior = 0.0;
  const auto& pen = model_->penalized();
  for (Index i = 0; i < xi_.size(); ++i)
    if (pen[i]) prior += std::fabs(xi_[i]);
  return -model_->precision_half() * data_misfit() - model_->lambda() * prior;
}

}  // namespace l1gibbs
