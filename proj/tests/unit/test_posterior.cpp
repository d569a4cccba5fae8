#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "l1gibbs/posterior.hpp"
#include "l1gibbs/random.hpp"
#include "oracles.hpp"

using namespace l1gibbs;

namespace {

MatrixXd random_matrix(Index r, Index c, Rng& rng) {
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

VectorXd random_vector(Index n, Rng& rng) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

SparseMatrixD sparse_identity(Index n) {
  SparseMatrixD d(n, n);
  d.setIdentity();
  return d;
}

PosteriorModel impulse_model(const MatrixXd& a, const VectorXd& m, double sigma, double lambda) {
  const Index n = a.cols();
  return PosteriorModel(std::make_shared<DenseOperator>(a), m, sigma, lambda, sparse_identity(n), Basis::identity(n),
                        std::vector<char>(static_cast<std::size_t>(n), 1));
}

PosteriorModel tv_model(const MatrixXd& a, const VectorXd& m, double sigma, double lambda) {
  const Index n = a.cols();
  std::vector<char> pen(static_cast<std::size_t>(n), 1);
  pen[0] = 0;
  return PosteriorModel(std::make_shared<DenseOperator>(a), m, sigma, lambda, forward_difference(n), Basis::step(n),
                        pen);
}

// Along each coordinate, log posterior minus the conditional exponent must
// not depend on t.
void check_conditionals(const PosteriorModel& model, CacheMode mode, Rng& rng) {
  const Index n = model.n();
  const VectorXd xi = random_vector(n, rng);
  CacheOptions opts;
  opts.mode = mode;
  CoefficientCache cache(model, xi, opts);
  for (Index i = 0; i < n; ++i) {
    const ExpQuadParams p = cache.conditional_params(i);
    double first = 0.0;
    for (int g = 0; g < 50; ++g) {
      const double t = -3.0 + 6.0 * g / 49.0;
      VectorXd x = xi;
      x[i] = t;
      const double gap = model.log_posterior_xi(x) - (-p.a * t * t + p.b * t - p.c * std::fabs(t));
      if (g == 0) first = gap;
      CHECK(std::fabs(gap - first) <= 1e-9 * std::max(1.0, std::fabs(first)));
    }
  }
}

}  // namespace

TEST_CASE("step basis: V xi is the cumulative sum and D V drops the offset") {
  const Basis v = Basis::step(6);
  VectorXd xi(6);
  xi << 1, 2, -1, 0, 3, 0.5;
  const VectorXd u = v.apply(xi);
  VectorXd want(6);
  want << 1, 3, 2, 2, 5, 5.5;
  CHECK((u - want).norm() < 1e-15);
  CHECK((v.apply_inverse(u) - xi).norm() < 1e-14);
  const VectorXd du = forward_difference(6) * u;
  CHECK((du - xi.tail(5)).norm() < 1e-14);
  const VectorXd w = VectorXd::LinSpaced(6, 1, 6);
  CHECK((v.apply_transpose(w) - v.to_dense().transpose() * w).norm() < 1e-12);
}

TEST_CASE("dense basis round-trips") {
  Rng rng(3);
  MatrixXd vm = random_matrix(5, 5, rng) + 5.0 * MatrixXd::Identity(5, 5);
  const Basis v = Basis::dense(vm);
  const VectorXd xi = random_vector(5, rng);
  CHECK((v.apply(xi) - vm * xi).norm() < 1e-13);
  CHECK((v.apply_inverse(v.apply(xi)) - xi).norm() < 1e-12);
}

TEST_CASE("log posterior agrees between u and xi coordinates") {
  Rng rng(4);
  const MatrixXd a = random_matrix(12, 8, rng);
  const VectorXd m = random_vector(12, rng);
  for (const auto& model : {impulse_model(a, m, 0.3, 2.0), tv_model(a, m, 0.3, 2.0)}) {
    const VectorXd u = random_vector(8, rng);
    const double direct = -(m - a * u).squaredNorm() / (2 * 0.09) - 2.0 * (model.d() * u).lpNorm<1>();
    CHECK(model.log_posterior_u(u) == doctest::Approx(direct).epsilon(1e-13));
    CHECK(model.log_posterior_xi(model.xi_from_u(u)) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("conditional coefficients reproduce the restricted posterior (n = 8)") {
  Rng rng(8);
  const MatrixXd a = random_matrix(12, 8, rng);
  const VectorXd m = random_vector(12, rng);
  for (CacheMode mode : {CacheMode::kDenseGram, CacheMode::kOperator}) {
    CAPTURE(to_string(mode));
    check_conditionals(impulse_model(a, m, 0.5, 3.0), mode, rng);
    check_conditionals(tv_model(a, m, 0.5, 3.0), mode, rng);
  }
}

TEST_CASE("dense-gram and operator modes agree on n = 256") {
  Rng rng(256);
  const Index n = 256, k = 200;
  const MatrixXd a = random_matrix(k, n, rng) / std::sqrt(static_cast<double>(k));
  const VectorXd m = random_vector(k, rng);
  for (const auto& model : {impulse_model(a, m, 0.2, 5.0), tv_model(a, m, 0.2, 5.0)}) {
    const VectorXd xi = random_vector(n, rng);
    CoefficientCache dense(model, xi, {CacheMode::kDenseGram, 4096, 0});
    CoefficientCache op(model, xi, {CacheMode::kOperator, 4096, 0});
    // Walk both through the same commits.
    for (int step = 0; step < 3 * n; ++step) {
      const Index i = static_cast<Index>(rng.index(n));
      const ExpQuadParams pd = dense.conditional_params(i);
      const ExpQuadParams po = op.conditional_params(i);
      REQUIRE(std::fabs(pd.a - po.a) <= 1e-10 * std::fabs(pd.a));
      REQUIRE(std::fabs(pd.b - po.b) <= 1e-10 * std::max(std::fabs(pd.b), pd.a));
      REQUIRE(pd.c == po.c);
      const double v = rng.normal();
      dense.commit(i, v);
      op.commit(i, v);
    }
    CHECK(dense.log_posterior() == doctest::Approx(op.log_posterior()).epsilon(1e-10));
    CHECK(dense.data_misfit() == doctest::Approx(model.data_misfit_u(model.u_from_xi(dense.xi()))).epsilon(1e-10));
    op.verify(1e-10);
  }
}

TEST_CASE("noise variance scales precomputed terms at use") {
  Rng rng(6);
  const MatrixXd a = random_matrix(10, 6, rng);
  const VectorXd m = random_vector(10, rng);
  PosteriorModel model = impulse_model(a, m, 0.5, 1.0);
  const VectorXd xi = random_vector(6, rng);
  CoefficientCache cache(model, xi);
  const ExpQuadParams before = cache.conditional_params(2);
  model.set_noise_variance(1.0);  // s goes from 2 to 0.5
  const ExpQuadParams after = cache.conditional_params(2);
  CHECK(after.a == doctest::Approx(before.a / 4.0).epsilon(1e-14));
  CHECK(after.b == doctest::Approx(before.b / 4.0).epsilon(1e-14));
  CHECK(after.c == before.c);
}

TEST_CASE("auto mode, thresholds and degenerate columns") {
  Rng rng(9);
  const MatrixXd a = random_matrix(20, 10, rng);
  const VectorXd m = random_vector(20, rng);
  const auto model = impulse_model(a, m, 1.0, 1.0);
  CHECK(CoefficientCache(model, VectorXd::Zero(10)).mode() == CacheMode::kDenseGram);
  CHECK_THROWS_AS(CoefficientCache(model, VectorXd::Zero(10), {CacheMode::kDenseGram, 5, 0}), CacheError);

  // A sparse identity-like operator favours operator mode.
  const auto sparse = PosteriorModel(std::make_shared<IdentityOperator>(50), random_vector(50, rng), 1.0, 1.0,
                                     sparse_identity(50), Basis::identity(50), std::vector<char>(50, 1));
  CHECK(CoefficientCache(sparse, VectorXd::Zero(50)).mode() == CacheMode::kOperator);

  // An unobserved, unpenalized direction leaves the posterior improper.
  MatrixXd holed = a;
  holed.col(0).setZero();
  std::vector<char> pen(10, 1);
  pen[0] = 0;
  const PosteriorModel bad(std::make_shared<DenseOperator>(holed), m, 1.0, 1.0, SparseMatrixD(sparse_identity(10).bottomRows(9)),
                           Basis::identity(10), pen);
  CHECK_THROWS_AS(CoefficientCache(bad, VectorXd::Zero(10)), CacheError);
  // Penalized: fine, the conditional is a two-sided exponential.
  CoefficientCache ok(impulse_model(holed, m, 1.0, 1.0), VectorXd::Zero(10));
  CHECK(ok.conditional_params(0).a == 0.0);
}

TEST_CASE("operator-mode refresh bounds drift over many commits") {
  Rng rng(10);
  const MatrixXd a = random_matrix(30, 40, rng);
  const auto model = tv_model(a, random_vector(30, rng), 0.1, 1.0);
  CoefficientCache cache(model, VectorXd::Zero(40), {CacheMode::kOperator, 4096, 7});
  for (int s = 0; s < 100000; ++s) cache.commit(static_cast<Index>(rng.index(40)), 1e3 * rng.normal());
  cache.verify(1e-12);
}

TEST_CASE("invalid models are rejected") {
  Rng rng(2);
  const MatrixXd a = random_matrix(5, 4, rng);
  const VectorXd m = random_vector(5, rng);
  CHECK_THROWS(PosteriorModel(std::make_shared<DenseOperator>(a), m, 0.0, 1.0, sparse_identity(4),
                              Basis::identity(4), std::vector<char>(4, 1)));
  CHECK_THROWS(PosteriorModel(std::make_shared<DenseOperator>(a), VectorXd::Zero(3), 1.0, 1.0, sparse_identity(4),
                              Basis::identity(4), std::vector<char>(4, 1)));
  // Penalized count must match the rows of D.
  CHECK_THROWS(PosteriorModel(std::make_shared<DenseOperator>(a), m, 1.0, 1.0, sparse_identity(4),
                              Basis::identity(4), std::vector<char>{1, 1, 0, 1}));
}

// ---- operators -------------------------------------------------------------

TEST_CASE("pixel weights match quadrature of the Gaussian over pixel pairs") {
  const double h = 1.0 / 31, s = 0.02;
  for (long d = 0; d <= 8; ++d) {
    // (1/h) int_0^h [Phi((x - d h)/s) - Phi((x - (d+1) h)/s)] dx, in long double.
    auto f = [&](oracle::real x) {
      const oracle::real lo = (x - d * (oracle::real)h) / s, hi = (x - (d + 1) * (oracle::real)h) / s;
      return 0.5L * (std::erfc(-lo / std::sqrt(2.0L)) - std::erfc(-hi / std::sqrt(2.0L)));
    };
    const double want = static_cast<double>(oracle::integrate(f, 0, h) / h);
    CAPTURE(d);
    CHECK(std::fabs(gaussian_pixel_weight(d, h, s) - want) <= 1e-13 + 1e-12 * want);
    CHECK(gaussian_pixel_weight(-d, h, s) == gaussian_pixel_weight(d, h, s));
  }
}

TEST_CASE("Conv2D equals the explicit reflected-image sum") {
  const int n = 9;
  const double s = 0.1, h = 1.0 / n;
  // 1-D factor by summing mirror images of each source pixel.
  MatrixXd b = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int w = -3; w <= 3; ++w) {
        b(i, j) += gaussian_pixel_weight(i - (j + 2L * n * w), h, s);
        b(i, j) += gaussian_pixel_weight(i - (-1 - j + 2L * n * w), h, s);
      }
  const Conv2DOperator op(n, s);
  CHECK((op.factor() - b).cwiseAbs().maxCoeff() < 1e-15);

  Rng rng(1);
  const VectorXd u = random_vector(n * n, rng);
  VectorXd want = VectorXd::Zero(n * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      for (int rr = 0; rr < n; ++rr)
        for (int cc = 0; cc < n; ++cc) want[r * n + c] += b(r, rr) * b(c, cc) * u[rr * n + cc];
  CHECK((op * u - want).norm() <= 1e-12 * want.norm());
  // Columns and norms agree with the dense form.
  const MatrixXd dense = op.to_dense();
  CHECK((dense * u - want).norm() <= 1e-12 * want.norm());
  CHECK((op.column_squared_norms() - dense.colwise().squaredNorm().transpose()).norm() < 1e-12);
  SparseColumn col;
  op.column(17, col);
  double err = 0;
  for (std::size_t t = 0; t < col.index.size(); ++t) err = std::max(err, std::fabs(col.value[t] - dense(col.index[t], 17)));
  CHECK(err < 1e-15);
}

TEST_CASE("Conv2D conserves mass and is symmetric") {
  const int n = 31;
  const Conv2DOperator op(n, 0.05);
  Rng rng(2);
  const VectorXd u = random_vector(n * n, rng), v = random_vector(n * n, rng);
  CHECK((op * u).sum() == doctest::Approx(u.sum()).epsilon(1e-11));
  CHECK(v.dot(op * u) == doctest::Approx(u.dot(op * v)).epsilon(1e-11));
  CHECK_THROWS(Conv2DOperator(n, 0.2));
}
